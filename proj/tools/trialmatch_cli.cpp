// trialmatch: command-line driver for every pipeline stage.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "trialmatch/app/pipeline.hpp"
#include "trialmatch/app/server.hpp"
#include "trialmatch/synthetic.hpp"

namespace fs = std::filesystem;
using namespace trialmatch;

namespace {

constexpr int kExitFailures = 1;
constexpr int kExitMissingInput = 2;
constexpr int kExitUsage = 64;

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> trials, patients, qrels, embeddings, out_dir;
  std::optional<std::size_t> top;
  std::optional<std::string> feature, backend;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> mock_fixtures, cache_file, query_encoder, keyword_embeddings;
  std::optional<std::string> host, token;
  std::optional<int> port;
  std::optional<std::size_t> per_patient;
  std::vector<std::string> annotators;
  std::optional<bool> judged_only;
  std::string log_level = "info";
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "TOML or JSON config file");
  cmd->add_option("--trials", f.trials, "trial corpus JSONL");
  cmd->add_option("--patients", f.patients, "patient notes JSONL");
  cmd->add_option("--qrels", f.qrels, "relevance judgments (patient 0 trial label)");
  cmd->add_option("--embeddings", f.embeddings, "trial embeddings JSONL for the dense index");
  cmd->add_option("--out-dir", f.out_dir, "artifact directory");
  cmd->add_option("--top", f.top, "retrieval candidates per patient");
  cmd->add_option("--feature", f.feature, "ranking feature");
  cmd->add_option("--backend", f.backend, "LLM backend")->check(CLI::IsMember({"mock", "remote"}));
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--parallelism", f.parallelism, "worker threads");
  cmd->add_option("--mock-fixtures", f.mock_fixtures, "mock backend fixture JSONL");
  cmd->add_option("--cache-file", f.cache_file, "LLM response cache JSONL");
  cmd->add_option("--query-encoder", f.query_encoder, "dense query encoder")
      ->check(CLI::IsMember({"hash", "file"}));
  cmd->add_option("--keyword-embeddings", f.keyword_embeddings, "precomputed keyword vectors");
  cmd->add_option("--log-level", f.log_level, "trace, debug, info, warn, error");
}

app::PipelineConfig resolve(const Flags& f) {
  app::PipelineConfig c;
  if (f.config) {
    fs::path path(*f.config);
    app::apply_config(c, app::load_config_document(path), path.parent_path());
  }
  auto set_path = [](fs::path& dst, const std::optional<std::string>& v) {
    if (v) dst = *v;
  };
  set_path(c.trials, f.trials);
  set_path(c.patients, f.patients);
  set_path(c.qrels, f.qrels);
  set_path(c.embeddings, f.embeddings);
  set_path(c.out_dir, f.out_dir);
  set_path(c.mock_fixtures, f.mock_fixtures);
  set_path(c.cache_file, f.cache_file);
  set_path(c.keyword_embeddings, f.keyword_embeddings);
  if (f.top) c.top = *f.top;
  if (f.feature) c.feature = *f.feature;
  if (f.backend) c.backend = *f.backend;
  if (f.seed) c.seed = *f.seed;
  if (f.parallelism) c.parallelism = *f.parallelism;
  if (f.query_encoder) c.query_encoder = *f.query_encoder;
  if (f.host) c.host = *f.host;
  if (f.port) c.port = *f.port;
  if (f.token) c.bearer_token = *f.token;
  if (f.per_patient) c.assign_per_patient = *f.per_patient;
  if (!f.annotators.empty()) c.annotators = f.annotators;
  if (f.judged_only) c.eval.judged_only = *f.judged_only;
  return c;
}

int report(const app::StageReport& r) {
  for (const auto& o : r.outputs) std::cout << r.stage << ": wrote " << o << '\n';
  for (const auto& e : r.failures) std::cerr << r.stage << ": failed " << e << '\n';
  return r.failures.empty() ? 0 : kExitFailures;
}

app::ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int serve(const app::PipelineConfig& c) {
  app::ArtifactStore store(c.out_dir);
  app::DecisionLog log(store.layout().decisions());
  app::ApiServer server(store, log, {c.host, c.port, c.bearer_token});
  int port = server.bind();
  std::cout << "serving " << c.out_dir.string() << " on http://" << c.host << ':' << port << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Patient-to-trial matching pipeline"};
  cli.require_subcommand(1);
  Flags f;

  auto* ingest = cli.add_subcommand("ingest", "validate corpora and copy them into --out-dir");
  auto* index = cli.add_subcommand("index", "build the lexical index and load trial embeddings");
  auto* retrieve = cli.add_subcommand("retrieve", "generate keywords and fuse hybrid rankings");
  auto* match = cli.add_subcommand("match", "criterion-level matching of retrieved pairs");
  auto* rank = cli.add_subcommand("rank", "aggregate predictions into trial scores and runs");
  auto* evaluate = cli.add_subcommand("evaluate", "score runs against the judgments");
  auto* run = cli.add_subcommand("run", "ingest through evaluate in one go");
  auto* serve_cmd = cli.add_subcommand("serve", "HTTP API over the artifacts");
  auto* assign = cli.add_subcommand("assign", "balanced two-annotator screening assignment");
  auto* synth = cli.add_subcommand("synth", "write a seeded synthetic cohort");

  for (auto* cmd : {ingest, index, retrieve, match, rank, evaluate, run, serve_cmd, assign}) {
    add_common(cmd, f);
  }
  for (auto* cmd : {evaluate, run}) {
    cmd->add_option("--judged-only", f.judged_only, "rank metrics over judged trials only");
  }
  serve_cmd->add_option("--host", f.host, "bind address");
  serve_cmd->add_option("--port", f.port, "port (0 picks a free one)");
  serve_cmd->add_option("--token", f.token, "require this bearer token");
  assign->add_option("--annotators", f.annotators, "exactly two annotator IDs")->expected(2);
  assign->add_option("--per-patient", f.per_patient, "top trials per patient to screen");

  synthetic::SynthConfig sc;
  std::string synth_dir;
  synth->add_option("--out-dir", synth_dir, "destination directory")->required();
  synth->add_option("--patients", sc.patients, "patient count");
  synth->add_option("--trials", sc.trials, "trial count");
  synth->add_option("--seed", sc.seed, "random seed");
  synth->add_option("--noise", sc.label_noise, "fixture label noise probability")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--aggregate-noise", sc.aggregate_noise, "fixture aggregate-score noise probability")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--dim", sc.embedding_dimension, "embedding dimension");
  synth->add_option("--log-level", f.log_level, "trace, debug, info, warn, error");

  CLI11_PARSE(cli, argc, argv);

  auto logger = spdlog::stderr_color_mt("trialmatch");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(f.log_level));

  try {
    if (synth->parsed()) {
      synthetic::write_cohort(synthetic::generate(sc), synth_dir, sc.seed);
      std::cout << "synth: wrote cohort to " << synth_dir << '\n';
      return 0;
    }
    auto config = resolve(f);
    if (ingest->parsed()) return report(app::run_ingest(config));
    if (index->parsed()) return report(app::run_index(config));
    if (evaluate->parsed()) return report(app::run_evaluate(config));
    if (assign->parsed()) return report(app::run_assign(config));
    if (serve_cmd->parsed()) return serve(config);

    if (run->parsed()) {
      int status = report(app::run_ingest(config));
      status |= report(app::run_index(config));
      auto gateway = app::make_gateway(config);
      status |= report(app::run_retrieve(config, *gateway));
      status |= report(app::run_match(config, *gateway));
      status |= report(app::run_rank(config, *gateway));
      status |= report(app::run_evaluate(config));
      return status;
    }
    // Check the stage's own inputs before the backend so a missing artifact
    // is reported as such even when the backend is misconfigured.
    app::ArtifactLayout layout{config.out_dir};
    if (retrieve->parsed()) {
      app::require_file(layout.lexical_index(), "run `trialmatch index` first");
      auto gateway = app::make_gateway(config);
      return report(app::run_retrieve(config, *gateway));
    }
    if (match->parsed()) {
      app::require_file(layout.retrieval(), "run `trialmatch retrieve` first");
      auto gateway = app::make_gateway(config);
      return report(app::run_match(config, *gateway));
    }
    if (rank->parsed()) {
      app::require_file(layout.matches(), "run `trialmatch match` first");
      auto gateway = app::make_gateway(config);
      return report(app::run_rank(config, *gateway));
    }
  } catch (const app::MissingInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailures;
  }
  return 0;
}
