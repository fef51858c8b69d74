#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trialmatch/app/artifacts.hpp"
#include "trialmatch/eval/metrics.hpp"
#include "trialmatch/llm/gateway.hpp"
#include "trialmatch/matching/matcher.hpp"
#include "trialmatch/retrieval/fusion.hpp"

namespace trialmatch::app {

/// Everything a stage may need. Filled from --config (TOML or JSON) and
/// then overridden by command-line flags.
struct PipelineConfig {
  std::filesystem::path trials;
  std::filesystem::path patients;
  std::filesystem::path qrels;
  std::filesystem::path embeddings;     // trial vectors for the dense index
  std::filesystem::path out_dir = "out";
  std::string cohort_name = "cohort";
  std::string label_vocabulary = "trec";

  std::size_t top = 500;                // retrieval candidates per patient
  std::string feature = "combination";
  std::string backend = "mock";         // mock | remote
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;

  std::filesystem::path mock_fixtures;
  std::filesystem::path cache_file;     // empty disables the response cache

  std::string query_encoder = "hash";   // hash | file
  std::filesystem::path keyword_embeddings;
  std::size_t hash_dimension = 64;
  std::string similarity = "inner_product";

  retrieval::FusionConfig fusion;
  matching::MatchingConfig matching;
  std::size_t match_candidates = 0;     // per patient; 0 matches every retrieved trial
  llm::GatewayConfig gateway;
  eval::EvalConfig eval;

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string bearer_token;

  std::vector<std::string> annotators = {"annotator_a", "annotator_b"};
  std::size_t assign_per_patient = 0;   // 0 takes every scored pair
};

/// Parses a .toml or .json file. Relative paths resolve against the file's
/// directory.
nlohmann::json load_config_document(const std::filesystem::path& path);

/// Applies recognised keys; unknown keys are a ConfigError so typos surface.
void apply_config(PipelineConfig& config, const nlohmann::json& doc,
                  const std::filesystem::path& base_dir = {});

/// Builds the backend named by config.backend behind a gateway.
std::unique_ptr<llm::Gateway> make_gateway(const PipelineConfig& config);

struct StageReport {
  std::string stage;
  std::vector<std::string> outputs;
  std::vector<std::string> failures;
};

StageReport run_ingest(const PipelineConfig& config);
StageReport run_index(const PipelineConfig& config);
StageReport run_retrieve(const PipelineConfig& config, llm::Gateway& gateway);
StageReport run_match(const PipelineConfig& config, llm::Gateway& gateway);
StageReport run_rank(const PipelineConfig& config, llm::Gateway& gateway);
StageReport run_evaluate(const PipelineConfig& config);
StageReport run_assign(const PipelineConfig& config);

}  // namespace trialmatch::app
