#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "trialmatch/app/pipeline.hpp"
#include "trialmatch/synthetic.hpp"

namespace testing_support {

/// Writes a synthetic cohort to `dir / "cohort"` and loads its pipeline.toml
/// with artifacts going to `dir / "out"`.
inline trialmatch::app::PipelineConfig synthetic_config(const std::filesystem::path& dir,
                                                        const trialmatch::synthetic::SynthConfig& sc) {
  using namespace trialmatch;
  auto cohort_dir = dir / "cohort";
  synthetic::write_cohort(synthetic::generate(sc), cohort_dir, sc.seed);
  app::PipelineConfig config;
  auto toml = cohort_dir / "pipeline.toml";
  app::apply_config(config, app::load_config_document(toml), cohort_dir);
  config.out_dir = dir / "out";
  return config;
}

/// ingest through evaluate; throws if any stage reports failures.
inline void run_all_stages(const trialmatch::app::PipelineConfig& config) {
  using namespace trialmatch;
  auto check = [](const app::StageReport& r) {
    if (!r.failures.empty()) throw std::runtime_error(r.stage + ": " + r.failures.front());
  };
  check(app::run_ingest(config));
  check(app::run_index(config));
  auto gateway = app::make_gateway(config);
  check(app::run_retrieve(config, *gateway));
  check(app::run_match(config, *gateway));
  check(app::run_rank(config, *gateway));
  check(app::run_evaluate(config));
}

}  // namespace testing_support
