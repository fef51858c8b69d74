#include "trialmatch/app/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <toml.hpp>

#include "trialmatch/llm/mock_backend.hpp"
#include "trialmatch/llm/remote_backend.hpp"
#include "trialmatch/ranking/ranking.hpp"
#include "trialmatch/retrieval/dense_index.hpp"
#include "trialmatch/retrieval/keywords.hpp"
#include "trialmatch/retrieval/lexical_index.hpp"
#include "trialmatch/retrieval/retriever.hpp"
#include "util/jsonl.hpp"

namespace trialmatch::app {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

json load_config_document(const fs::path& path) {
  require_file(path, "--config");
  auto ext = path.extension().string();
  if (ext == ".toml") {
    try {
      auto table = toml::parse_file(path.string());
      std::ostringstream ss;
      ss << toml::json_formatter{table};
      return json::parse(ss.str());
    } catch (const toml::parse_error& e) {
      throw ConfigError(path.string() + ": " + std::string(e.description()));
    }
  }
  auto in = util::open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

using Setter = std::function<void(PipelineConfig&, const json&, const fs::path&)>;

template <typename T>
T as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::set<corpus::RelevanceLabel> label_set(const json& v, const std::string& key) {
  std::set<corpus::RelevanceLabel> out;
  for (const auto& s : as<std::vector<std::string>>(v, key)) {
    auto l = corpus::relevance_label_from_string(s);
    if (!l) throw ConfigError("config key '" + key + "': unknown label '" + s + "'");
    out.insert(*l);
  }
  return out;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto path = [&t](const std::string& key, fs::path PipelineConfig::*member) {
      t[key] = [key, member](PipelineConfig& c, const json& v, const fs::path& base) {
        c.*member = resolve(base, as<std::string>(v, key));
      };
    };
    auto value = [&t]<typename T>(const std::string& key, T PipelineConfig::*member) {
      t[key] = [key, member](PipelineConfig& c, const json& v, const fs::path&) {
        c.*member = as<T>(v, key);
      };
    };
    path("trials", &PipelineConfig::trials);
    path("patients", &PipelineConfig::patients);
    path("qrels", &PipelineConfig::qrels);
    path("embeddings", &PipelineConfig::embeddings);
    path("out_dir", &PipelineConfig::out_dir);
    path("mock_fixtures", &PipelineConfig::mock_fixtures);
    path("cache_file", &PipelineConfig::cache_file);
    path("keyword_embeddings", &PipelineConfig::keyword_embeddings);
    value("cohort_name", &PipelineConfig::cohort_name);
    value("label_vocabulary", &PipelineConfig::label_vocabulary);
    value("top", &PipelineConfig::top);
    value("feature", &PipelineConfig::feature);
    value("backend", &PipelineConfig::backend);
    value("seed", &PipelineConfig::seed);
    value("parallelism", &PipelineConfig::parallelism);
    value("query_encoder", &PipelineConfig::query_encoder);
    value("hash_dimension", &PipelineConfig::hash_dimension);
    value("similarity", &PipelineConfig::similarity);
    value("match_candidates", &PipelineConfig::match_candidates);
    value("host", &PipelineConfig::host);
    value("port", &PipelineConfig::port);
    value("bearer_token", &PipelineConfig::bearer_token);
    value("annotators", &PipelineConfig::annotators);
    value("assign_per_patient", &PipelineConfig::assign_per_patient);

    t["fusion.rrf_constant"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.fusion.rrf_constant = as<double>(v, "fusion.rrf_constant");
    };
    t["fusion.per_keyword_cutoff"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.fusion.per_keyword_cutoff = as<std::size_t>(v, "fusion.per_keyword_cutoff");
    };
    t["matching.prompt_token_budget"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.matching.prompt_token_budget = as<std::size_t>(v, "matching.prompt_token_budget");
    };
    t["matching.reask_on_failure"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.matching.reask_on_failure = as<bool>(v, "matching.reask_on_failure");
    };
    t["gateway.model"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.gateway.model = as<std::string>(v, "gateway.model");
    };
    t["gateway.max_output_tokens"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.gateway.max_output_tokens = as<int>(v, "gateway.max_output_tokens");
    };
    t["gateway.max_attempts"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.gateway.max_attempts = as<int>(v, "gateway.max_attempts");
    };
    t["gateway.initial_backoff_ms"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.gateway.initial_backoff = std::chrono::milliseconds(as<long>(v, "gateway.initial_backoff_ms"));
    };
    t["gateway.max_backoff_ms"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.gateway.max_backoff = std::chrono::milliseconds(as<long>(v, "gateway.max_backoff_ms"));
    };
    t["gateway.max_in_flight"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.gateway.max_in_flight = as<std::size_t>(v, "gateway.max_in_flight");
    };
    t["gateway.requests_per_second"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.gateway.requests_per_second = as<double>(v, "gateway.requests_per_second");
    };
    t["gateway.burst"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.gateway.burst = as<double>(v, "gateway.burst");
    };
    t["eval.judged_only"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.eval.judged_only = as<bool>(v, "eval.judged_only");
    };
    t["eval.recall_ks"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.eval.recall_ks = as<std::vector<std::size_t>>(v, "eval.recall_ks");
    };
    t["eval.ndcg_k"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.eval.ndcg_k = as<std::size_t>(v, "eval.ndcg_k");
    };
    t["eval.precision_k"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.eval.precision_k = as<std::size_t>(v, "eval.precision_k");
    };
    t["eval.auroc_positive"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.eval.auroc_positive = label_set(v, "eval.auroc_positive");
    };
    t["eval.auroc_negative"] = [](PipelineConfig& c, const json& v, const fs::path&) {
      c.eval.auroc_negative = label_set(v, "eval.auroc_negative");
    };
    return t;
  }();
  return table;
}

void apply_keys(PipelineConfig& config, const json& doc, const fs::path& base,
                const std::string& prefix) {
  for (const auto& [key, value] : doc.items()) {
    auto full = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      apply_keys(config, value, base, full);
      continue;
    }
    auto it = setters().find(full);
    if (it == setters().end()) throw ConfigError("unknown config key '" + full + "'");
    it->second(config, value, base);
  }
}

}  // namespace

void apply_config(PipelineConfig& config, const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config document must be a table/object");
  apply_keys(config, doc, base_dir, "");
}

std::unique_ptr<llm::Gateway> make_gateway(const PipelineConfig& config) {
  auto gc = config.gateway;
  gc.seed = config.seed;
  if (!config.cache_file.empty()) gc.cache_path = config.cache_file;
  std::shared_ptr<llm::Backend> backend;
  if (config.backend == "mock") {
    auto mock = std::make_shared<llm::MockBackend>();
    if (config.mock_fixtures.empty()) {
      throw ConfigError("--backend mock needs mock_fixtures (set --mock-fixtures or the config key)");
    }
    require_file(config.mock_fixtures, "mock fixtures");
    auto n = mock->register_fixtures(config.mock_fixtures);
    spdlog::info("mock backend: {} fixtures from {}", n, config.mock_fixtures.string());
    backend = std::move(mock);
  } else if (config.backend == "remote") {
    auto rc = llm::remote_config_from_env();
    gc.model = rc.model;
    backend = std::make_shared<llm::RemoteBackend>(std::move(rc));
  } else {
    throw ConfigError("unknown backend '" + config.backend + "' (expected mock or remote)");
  }
  return std::make_unique<llm::Gateway>(std::move(backend), std::move(gc));
}

// ---------------------------------------------------------------------------
// Stages

namespace {

constexpr std::string_view kIngestFirst = "run `trialmatch ingest` first";

void write_json_file(const fs::path& path, const json& j) {
  auto out = util::open_output(path);
  out << j.dump(2) << '\n';
}

std::vector<retrieval::RetrievalResult> load_retrieval(const fs::path& path) {
  std::vector<retrieval::RetrievalResult> out;
  auto in = util::open_input(path);
  util::for_each_jsonl(in, [&](const json& j, std::size_t line_no) {
    try {
      out.push_back(retrieval::retrieval_result_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad retrieval record: ") + e.what(), line_no);
    }
  });
  return out;
}

/// Runs fn(i) for i in [0, n) on up to `parallelism` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t parallelism, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::jthread> workers;
  auto k = std::max<std::size_t>(1, std::min(parallelism, n));
  for (std::size_t w = 0; w < k; ++w) workers.emplace_back(work);
}

retrieval::Similarity parse_similarity(const std::string& s) {
  if (s == "inner_product") return retrieval::Similarity::inner_product;
  if (s == "cosine") return retrieval::Similarity::cosine;
  throw ConfigError("unknown similarity '" + s + "' (expected inner_product or cosine)");
}

}  // namespace

StageReport run_ingest(const PipelineConfig& config) {
  StageReport report{"ingest", {}, {}};
  if (config.trials.empty()) throw ConfigError("ingest needs --trials");
  if (config.patients.empty()) throw ConfigError("ingest needs --patients");
  require_file(config.trials, "--trials");
  require_file(config.patients, "--patients");

  auto trials = corpus::parse_trial_corpus(config.trials);
  auto patients = corpus::parse_patients(config.patients);
  corpus::Cohort cohort{config.cohort_name, patients, {}, config.trials};
  if (!config.qrels.empty()) {
    require_file(config.qrels, "--qrels");
    cohort.judgments = corpus::load_qrels(config.qrels, corpus::LabelVocabulary::named(config.label_vocabulary));
  } else {
    spdlog::warn("no --qrels given; evaluate will not be possible");
  }
  cohort.validate();

  std::set<std::string> trial_ids;
  for (const auto& t : trials) trial_ids.insert(t.nct_id);
  std::size_t unknown = 0;
  for (const auto& j : cohort.judgments) unknown += trial_ids.contains(j.nct_id) ? 0 : 1;
  if (unknown > 0) spdlog::warn("{} judgments reference trials outside the corpus", unknown);

  ArtifactLayout layout{config.out_dir};
  {
    auto out = util::open_output(layout.trials());
    corpus::write_trial_corpus(out, trials);
  }
  {
    auto out = util::open_output(layout.patients());
    corpus::write_patients(out, patients);
  }
  {
    auto out = util::open_output(layout.qrels());
    for (const auto& j : cohort.judgments) {
      out << j.patient_id << " 0 " << j.nct_id << ' ' << corpus::to_string(j.label) << '\n';
    }
  }
  write_json_file(layout.cohort(), to_json(CohortInfo{config.cohort_name, config.label_vocabulary,
                                                      patients.size(), trials.size(),
                                                      cohort.judgments.size()}));
  spdlog::info("ingest: {} trials, {} patients, {} judgments", trials.size(), patients.size(),
               cohort.judgments.size());
  report.outputs = {layout.trials().string(), layout.patients().string(), layout.qrels().string(),
                    layout.cohort().string()};
  return report;
}

StageReport run_index(const PipelineConfig& config) {
  StageReport report{"index", {}, {}};
  ArtifactLayout layout{config.out_dir};
  require_file(layout.trials(), kIngestFirst);
  auto trials = corpus::parse_trial_corpus(layout.trials());

  auto lexical = retrieval::LexicalIndex::build(trials);
  {
    auto out = util::open_output(layout.lexical_index());
    lexical.save(out);
  }
  report.outputs.push_back(layout.lexical_index().string());
  spdlog::info("index: {} documents, average length {:.1f}", lexical.document_count(),
               lexical.average_length());

  if (!config.embeddings.empty()) {
    require_file(config.embeddings, "--embeddings");
    auto table = retrieval::load_embeddings(config.embeddings);
    std::map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < table.ids.size(); ++i) row[table.ids[i]] = i;
    retrieval::EmbeddingTable kept{table.dimension, {}, {}};
    std::size_t missing = 0;
    for (const auto& t : trials) {
      auto it = row.find(t.nct_id);
      if (it == row.end()) {
        ++missing;
        continue;
      }
      kept.ids.push_back(t.nct_id);
      kept.vectors.push_back(table.vectors[it->second]);
    }
    if (missing > 0) spdlog::warn("index: {} trials have no embedding and are lexical-only", missing);
    if (kept.ids.empty()) throw Error("no embedding matches a corpus trial in " + config.embeddings.string());
    (void)retrieval::DenseIndex::build(kept, parse_similarity(config.similarity));
    auto out = util::open_output(layout.trial_embeddings());
    retrieval::write_embeddings(out, kept);
    report.outputs.push_back(layout.trial_embeddings().string());
  } else if (fs::exists(layout.trial_embeddings())) {
    fs::remove(layout.trial_embeddings());
  }
  return report;
}

StageReport run_retrieve(const PipelineConfig& config, llm::Gateway& gateway) {
  StageReport report{"retrieve", {}, {}};
  ArtifactLayout layout{config.out_dir};
  require_file(layout.patients(), kIngestFirst);
  require_file(layout.lexical_index(), "run `trialmatch index` first");

  auto patients = corpus::parse_patients(layout.patients());
  auto lexical = [&] {
    auto in = util::open_input(layout.lexical_index());
    return retrieval::LexicalIndex::load(in);
  }();

  std::optional<retrieval::DenseIndex> dense;
  std::unique_ptr<retrieval::EmbeddingProvider> provider;
  std::optional<retrieval::EmbeddingTable> keyword_table;
  if (fs::exists(layout.trial_embeddings())) {
    dense = retrieval::DenseIndex::build(retrieval::load_embeddings(layout.trial_embeddings()),
                                         parse_similarity(config.similarity));
    if (config.query_encoder == "hash") {
      provider = std::make_unique<retrieval::HashEmbeddingProvider>(config.hash_dimension);
    } else if (config.query_encoder == "file") {
      if (config.keyword_embeddings.empty()) {
        throw ConfigError("query_encoder=file needs keyword_embeddings");
      }
      require_file(config.keyword_embeddings, "keyword_embeddings");
      keyword_table = retrieval::load_embeddings(config.keyword_embeddings);
      provider = std::make_unique<retrieval::FileEmbeddingProvider>(*keyword_table);
    } else {
      throw ConfigError("unknown query_encoder '" + config.query_encoder + "' (expected hash or file)");
    }
  }

  auto fusion = config.fusion;
  fusion.candidate_count = config.top;
  retrieval::HybridRetriever retriever(lexical, dense ? &*dense : nullptr, provider.get(), fusion);

  std::vector<std::optional<retrieval::KeywordQuery>> queries(patients.size());
  std::vector<std::optional<retrieval::RetrievalResult>> results(patients.size());
  std::vector<std::string> errors(patients.size());
  parallel_for(patients.size(), config.parallelism, [&](std::size_t i) {
    try {
      queries[i] = retrieval::generate_keywords(patients[i], gateway);
      results[i] = retriever.retrieve(*queries[i]);
    } catch (const retrieval::KeywordError& e) {
      errors[i] = std::string(e.what()) + "; raw response: " + e.raw_response().substr(0, 200);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  auto kw_out = util::open_output(layout.keywords());
  auto rr_out = util::open_output(layout.retrieval());
  std::vector<eval::RankedRun> runs;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    if (!errors[i].empty()) {
      report.failures.push_back(patients[i].patient_id + ": " + errors[i]);
      continue;
    }
    kw_out << util::dump_line(retrieval::to_json(*queries[i])) << '\n';
    rr_out << util::dump_line(retrieval::to_json(*results[i])) << '\n';
    eval::RankedRun run{patients[i].patient_id, {}};
    for (const auto& c : results[i]->scored) run.entries.emplace_back(c.nct_id, c.score);
    runs.push_back(std::move(run));
  }
  eval::write_run_file(layout.retrieval_run(), runs, "trialmatch-retrieval");
  report.outputs = {layout.keywords().string(), layout.retrieval().string(),
                    layout.retrieval_run().string()};
  return report;
}

StageReport run_match(const PipelineConfig& config, llm::Gateway& gateway) {
  StageReport report{"match", {}, {}};
  ArtifactLayout layout{config.out_dir};
  require_file(layout.retrieval(), "run `trialmatch retrieve` first");
  require_file(layout.patients(), kIngestFirst);
  require_file(layout.trials(), kIngestFirst);

  auto patients = corpus::parse_patients(layout.patients());
  auto trials = corpus::parse_trial_corpus(layout.trials());
  auto retrieved = load_retrieval(layout.retrieval());

  matching::MatchCohortOptions options;
  options.parallelism = config.parallelism;
  options.max_candidates = config.match_candidates;
  options.matching = config.matching;
  auto summary = matching::match_cohort(patients, trials, retrieved, gateway, layout.matches(), options);

  auto failures = json::array();
  for (const auto& f : summary.failures) {
    failures.push_back({{"patient_id", f.patient_id}, {"nct_id", f.nct_id}, {"error", f.error}});
    report.failures.push_back(f.patient_id + "/" + f.nct_id + ": " + f.error);
  }
  write_json_file(layout.match_summary(), {{"total_pairs", summary.total_pairs},
                                           {"already_present", summary.already_present},
                                           {"matched", summary.matched},
                                           {"failures", failures}});
  spdlog::info("match: {} pairs, {} already present, {} matched, {} failed", summary.total_pairs,
               summary.already_present, summary.matched, summary.failures.size());
  report.outputs = {layout.matches().string(), layout.match_summary().string()};
  return report;
}

StageReport run_rank(const PipelineConfig& config, llm::Gateway& gateway) {
  StageReport report{"rank", {}, {}};
  ArtifactLayout layout{config.out_dir};
  require_file(layout.matches(), "run `trialmatch match` first");
  require_file(layout.patients(), kIngestFirst);
  require_file(layout.trials(), kIngestFirst);
  (void)ranking::feature_from_string(config.feature);

  auto patients = corpus::parse_patients(layout.patients());
  auto trials = corpus::parse_trial_corpus(layout.trials());
  auto matches = matching::load_matches(layout.matches());
  auto scores = ranking::score_matches(patients, trials, matches, gateway, {config.parallelism});
  ranking::write_scores(layout.scores(), scores);
  report.outputs.push_back(layout.scores().string());

  std::map<std::string, std::vector<ranking::TrialScore>> by_patient;
  for (const auto& s : scores) by_patient[s.patient_id].push_back(s);

  for (auto feature : ranking::all_features()) {
    std::vector<eval::RankedRun> runs;
    for (const auto& [pid, ss] : by_patient) {
      runs.push_back({pid, ranking::ranked_scores(ss, feature)});
    }
    auto path = layout.ranking_run(ranking::to_string(feature));
    eval::write_run_file(path, runs, "trialmatch-" + std::string(ranking::to_string(feature)));
    report.outputs.push_back(path.string());
  }

  std::vector<eval::RankedRun> excluding;
  for (const auto& [pid, ss] : by_patient) {
    eval::RankedRun run{pid, {}};
    for (const auto& s : ss) run.entries.emplace_back(s.nct_id, s.exclusion_score);
    run.normalize();
    excluding.push_back(std::move(run));
  }
  eval::write_run_file(layout.excluding_run(), excluding, "trialmatch-excluding");
  report.outputs.push_back(layout.excluding_run().string());

  std::size_t failed = std::count_if(scores.begin(), scores.end(),
                                     [](const auto& s) { return s.llm.parse_failed; });
  if (failed > 0) spdlog::warn("rank: {} aggregation responses were unreadable and scored 0", failed);
  return report;
}

StageReport run_evaluate(const PipelineConfig& config) {
  StageReport report{"evaluate", {}, {}};
  ArtifactLayout layout{config.out_dir};
  require_file(layout.cohort(), kIngestFirst);
  require_file(layout.qrels(), kIngestFirst);
  CohortInfo info = [&] {
    auto in = util::open_input(layout.cohort());
    return cohort_info_from_json(json::parse(in));
  }();
  auto judgments = corpus::load_qrels(layout.qrels(), corpus::LabelVocabulary::named(info.label_vocabulary));
  if (judgments.empty()) throw Error("no relevance judgments in " + layout.qrels().string());

  json out{{"cohort", info.name}};
  std::string text;
  auto evaluate = [&](const fs::path& run_path, eval::Task task) {
    eval::CohortRuns c{info.name, judgments, eval::read_run_file(run_path)};
    auto r = eval::evaluate_cohorts({c}, task, config.eval);
    text += "== " + run_path.filename().string() + "\n" + r.to_text();
    return r.to_json();
  };

  bool any = false;
  if (fs::exists(layout.retrieval_run())) {
    out["retrieval"] = evaluate(layout.retrieval_run(), eval::Task::retrieval);
    any = true;
  }
  auto primary = ranking::feature_from_string(config.feature);
  if (fs::exists(layout.ranking_run(ranking::to_string(primary)))) {
    out["ranking"] = json::object();
    for (auto f : ranking::all_features()) {
      auto path = layout.ranking_run(ranking::to_string(f));
      if (fs::exists(path)) out["ranking"][std::string(ranking::to_string(f))] = evaluate(path, eval::Task::ranking);
    }
    any = true;
  }
  if (fs::exists(layout.excluding_run())) {
    bool has_positive = std::any_of(judgments.begin(), judgments.end(), [&](const auto& j) {
      return config.eval.auroc_positive.contains(j.label);
    });
    if (has_positive) {
      out["excluding"] = evaluate(layout.excluding_run(), eval::Task::excluding);
    } else {
      spdlog::warn("evaluate: no judgments carry a positive exclusion label; excluding task skipped");
    }
    any = true;
  }
  if (!any) throw MissingInput(layout.ranking_run(config.feature), "run `trialmatch rank` first");

  write_json_file(layout.report_json(), out);
  auto t = util::open_output(layout.report_text());
  t << text;
  report.outputs = {layout.report_json().string(), layout.report_text().string()};
  return report;
}

StageReport run_assign(const PipelineConfig& config) {
  StageReport report{"assign", {}, {}};
  ArtifactLayout layout{config.out_dir};
  require_file(layout.scores(), "run `trialmatch rank` first");
  auto feature = ranking::feature_from_string(config.feature);
  std::map<std::string, std::vector<ranking::TrialScore>> by_patient;
  for (auto& s : ranking::load_scores(layout.scores())) by_patient[s.patient_id].push_back(std::move(s));

  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& [pid, ss] : by_patient) {
    auto ranked = ranking::rank_trials(ss, feature);
    if (config.assign_per_patient > 0 && ranked.size() > config.assign_per_patient) {
      ranked.resize(config.assign_per_patient);
    }
    for (auto& nct : ranked) pairs.emplace_back(pid, std::move(nct));
  }
  auto a = build_screening_assignment(pairs, config.annotators, config.seed);
  write_json_file(layout.assignment(), to_json(a));
  report.outputs.push_back(layout.assignment().string());
  return report;
}

}  // namespace trialmatch::app
