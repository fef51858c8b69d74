#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "pipeline_fixture.hpp"
#include "support.hpp"
#include "trialmatch/app/pipeline.hpp"
#include "trialmatch/error.hpp"
#include "trialmatch/llm/mock_backend.hpp"

using namespace trialmatch;
using namespace trialmatch::app;
using nlohmann::json;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

json report_of(const PipelineConfig& c) {
  return json::parse(testing_support::read_file(ArtifactLayout{c.out_dir}.report_json()));
}

double mean_of(const json& report, const std::string& metric) {
  return report["cohorts"][0]["mean"][metric].get<double>();
}

}  // namespace

TEST(Config, TomlWithNestedKeysAndRelativePaths) {
  TempDir dir;
  write_file(dir / "cfg/pipeline.toml",
             "trials = \"data/trials.jsonl\"\n"
             "top = 50\n"
             "seed = 9\n"
             "[fusion]\nrrf_constant = 30.0\n"
             "[matching]\nreask_on_failure = true\n"
             "[gateway]\nmax_attempts = 2\n"
             "[eval]\njudged_only = false\n");
  PipelineConfig c;
  apply_config(c, load_config_document(dir / "cfg/pipeline.toml"), dir / "cfg");
  EXPECT_EQ(c.trials, dir / "cfg" / "data/trials.jsonl");
  EXPECT_EQ(c.top, 50u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.fusion.rrf_constant, 30.0);
  EXPECT_TRUE(c.matching.reask_on_failure);
  EXPECT_EQ(c.gateway.max_attempts, 2);
  EXPECT_FALSE(c.eval.judged_only);
}

TEST(Config, JsonAndErrors) {
  TempDir dir;
  write_file(dir / "a.json", R"({"feature": "met_inc", "parallelism": 2})");
  PipelineConfig c;
  apply_config(c, load_config_document(dir / "a.json"));
  EXPECT_EQ(c.feature, "met_inc");
  EXPECT_EQ(c.parallelism, 2u);

  EXPECT_THROW(apply_config(c, json{{"tpo", 3}}), ConfigError);
  EXPECT_THROW(apply_config(c, json{{"top", "many"}}), ConfigError);
  write_file(dir / "bad.toml", "top = = 3\n");
  EXPECT_THROW(load_config_document(dir / "bad.toml"), ConfigError);
  EXPECT_THROW(load_config_document(dir / "absent.toml"), MissingInput);
}

TEST(Gateway, BackendSelection) {
  PipelineConfig c;
  c.backend = "mock";
  c.mock_fixtures = "/nonexistent/fixtures.jsonl";
  EXPECT_THROW(make_gateway(c), MissingInput);
  c.backend = "remote";
  ::unsetenv("TRIALMATCH_LLM_KEY");
  EXPECT_THROW(make_gateway(c), ConfigError);
  c.backend = "carrier-pigeon";
  EXPECT_THROW(make_gateway(c), ConfigError);
}

TEST(Stages, MissingPredecessorArtifacts) {
  TempDir dir;
  PipelineConfig c;
  c.out_dir = dir.path();
  EXPECT_THROW(run_index(c), MissingInput);
  EXPECT_THROW(run_evaluate(c), MissingInput);
  EXPECT_THROW(run_assign(c), MissingInput);
  llm::Gateway g(std::make_shared<llm::MockBackend>());
  try {
    run_match(c, g);
    FAIL();
  } catch (const MissingInput& e) {
    EXPECT_EQ(e.path(), ArtifactLayout{c.out_dir}.retrieval());
  }
}

TEST(Synthetic, CleanCohortIsRankedPerfectly) {
  TempDir dir;
  synthetic::SynthConfig sc;
  sc.patients = 4;
  sc.trials = 20;
  auto c = testing_support::synthetic_config(dir.path(), sc);
  testing_support::run_all_stages(c);
  auto report = report_of(c);
  EXPECT_EQ(mean_of(report["ranking"]["combination"], "ndcg@10"), 1.0);
  EXPECT_EQ(mean_of(report["excluding"], "auroc"), 1.0);
  EXPECT_EQ(mean_of(report["retrieval"], "recall@100"), 1.0);

  // Every stage's artifact is present and loadable.
  ArtifactStore store(c.out_dir);
  EXPECT_EQ(store.patients().size(), 4u);
  EXPECT_EQ(store.cohort().trials, 20u);
}

TEST(Synthetic, GeneratorIsDeterministicAndLabelsConsistent) {
  synthetic::SynthConfig sc;
  auto a = synthetic::generate(sc), b = synthetic::generate(sc);
  EXPECT_EQ(a.trials, b.trials);
  EXPECT_EQ(a.patients, b.patients);
  EXPECT_EQ(a.judgments, b.judgments);
  for (const auto& j : a.judgments) {
    auto cls = a.truth.at({j.patient_id, j.nct_id});
    int expected = cls == synthetic::TruthClass::eligible ? 2 : cls == synthetic::TruthClass::excluded ? 1 : 0;
    EXPECT_EQ(j.grade, expected);
  }
}

TEST(Synthetic, RerunReusesMatches) {
  TempDir dir;
  synthetic::SynthConfig sc;
  sc.patients = 2;
  sc.trials = 10;
  auto c = testing_support::synthetic_config(dir.path(), sc);
  testing_support::run_all_stages(c);
  auto before = testing_support::read_file(ArtifactLayout{c.out_dir}.matches());
  auto gateway = make_gateway(c);
  auto r = run_match(c, *gateway);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_EQ(gateway->backend_calls(), 0u);
  EXPECT_EQ(testing_support::read_file(ArtifactLayout{c.out_dir}.matches()), before);
}
