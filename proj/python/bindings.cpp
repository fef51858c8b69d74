#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "trialmatch/app/pipeline.hpp"
#include "trialmatch/error.hpp"
#include "trialmatch/eval/metrics.hpp"
#include "trialmatch/matching/matcher.hpp"
#include "trialmatch/ranking/ranking.hpp"
#include "trialmatch/retrieval/fusion.hpp"
#include "trialmatch/retrieval/lexical_index.hpp"
#include "trialmatch/synthetic.hpp"

namespace py = pybind11;
using namespace trialmatch;

namespace {

using Ranked = std::vector<std::pair<std::string, double>>;

Side side_from(const std::string& s) {
  if (s == "inclusion") return Side::inclusion;
  if (s == "exclusion") return Side::exclusion;
  throw ConfigError("side must be 'inclusion' or 'exclusion', got '" + s + "'");
}

eval::PatientJudgments judgments_from(const std::map<std::string, std::string>& labels) {
  eval::PatientJudgments out;
  for (const auto& [id, text] : labels) {
    auto label = corpus::relevance_label_from_string(text);
    if (!label) throw ConfigError("unknown relevance label '" + text + "'");
    out[id] = *label;
  }
  return out;
}

eval::RankedRun run_from(const std::vector<std::string>& ids) {
  eval::RankedRun run{"p", {}};
  for (std::size_t i = 0; i < ids.size(); ++i) run.entries.emplace_back(ids[i], double(ids.size() - i));
  return run;
}

// ("lexical" | "dense", keyword position, [(nct_id, score), ...]) per list.
Ranked fuse(const std::vector<std::tuple<std::string, std::size_t, Ranked>>& lists, double rrf_constant,
            std::size_t per_keyword_cutoff, std::size_t candidate_count) {
  std::vector<retrieval::KeywordRanking> rankings;
  for (const auto& [name, keyword, ranked] : lists) {
    retrieval::KeywordRanking r;
    if (name == "lexical") r.retriever = retrieval::Retriever::lexical;
    else if (name == "dense") r.retriever = retrieval::Retriever::dense;
    else throw ConfigError("retriever must be 'lexical' or 'dense', got '" + name + "'");
    r.keyword_index = keyword;
    for (const auto& [id, score] : ranked) r.ranked_trials.push_back({id, score});
    rankings.push_back(std::move(r));
  }
  retrieval::FusionConfig config{rrf_constant, per_keyword_cutoff, candidate_count};
  config.validate();
  Ranked out;
  for (const auto& t : retrieval::fuse(rankings, config).scored) out.emplace_back(t.nct_id, t.score);
  return out;
}

Ranked bm25(const std::vector<std::pair<std::string, std::string>>& documents, const std::string& query) {
  Ranked out;
  for (const auto& t : retrieval::LexicalIndex::build(documents).score_all(query)) out.emplace_back(t.nct_id, t.score);
  return out;
}

py::list parse_matching(const std::string& text, std::size_t expected, const std::string& side,
                        std::size_t sentences) {
  py::list out;
  for (const auto& p : matching::parse_matching_response(text, expected, side_from(side), sentences)) {
    py::dict d;
    d["criterion_index"] = p.criterion_index;
    d["label"] = std::string(matching::to_string(p.label));
    d["relevant_sentences"] = p.relevant_sentences;
    d["explanation"] = p.explanation;
    d["parse_status"] = std::string(matching::to_string(p.parse_status));
    out.append(std::move(d));
  }
  return out;
}

std::pair<double, double> combine(double met_inc, double unmet_inc, double met_exc, double relevance,
                                  double eligibility) {
  ranking::LinearAggregates a;
  a.pct_met_inclusion = met_inc;
  a.pct_unmet_inclusion = unmet_inc;
  a.pct_met_exclusion = met_exc;
  ranking::LlmAggregates l;
  l.relevance = relevance;
  l.eligibility = eligibility;
  return ranking::combine(a, l);
}

// Returns the stage reports as (stage, outputs, failures).
std::vector<std::tuple<std::string, std::vector<std::string>, std::vector<std::string>>> run_pipeline(
    const std::filesystem::path& config_path, std::optional<std::filesystem::path> out_dir,
    std::optional<std::string> backend, std::optional<std::uint64_t> seed) {
  app::PipelineConfig c;
  app::apply_config(c, app::load_config_document(config_path), config_path.parent_path());
  if (out_dir) c.out_dir = *out_dir;
  if (backend) c.backend = *backend;
  if (seed) c.seed = *seed;
  std::vector<app::StageReport> reports;
  {
    py::gil_scoped_release release;
    reports.push_back(app::run_ingest(c));
    reports.push_back(app::run_index(c));
    auto gateway = app::make_gateway(c);
    reports.push_back(app::run_retrieve(c, *gateway));
    reports.push_back(app::run_match(c, *gateway));
    reports.push_back(app::run_rank(c, *gateway));
    reports.push_back(app::run_evaluate(c));
  }
  std::vector<std::tuple<std::string, std::vector<std::string>, std::vector<std::string>>> out;
  for (auto& r : reports) out.emplace_back(r.stage, r.outputs, r.failures);
  return out;
}

void synth(const std::filesystem::path& dir, std::size_t patients, std::size_t trials, std::uint64_t seed,
           double label_noise, double aggregate_noise) {
  synthetic::SynthConfig sc;
  sc.patients = patients;
  sc.trials = trials;
  sc.seed = seed;
  sc.label_noise = label_noise;
  sc.aggregate_noise = aggregate_noise;
  synthetic::write_cohort(synthetic::generate(sc), dir, seed);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the trialmatch pipeline";

  // Translators run most recent first, so the base class goes in first.
  py::register_exception<Error>(m, "TrialmatchError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<app::MissingInput>(m, "MissingInput", PyExc_FileNotFoundError);

  m.def("fuse", &fuse, py::arg("lists"), py::arg("rrf_constant") = 20.0, py::arg("per_keyword_cutoff") = 1000,
        py::arg("candidate_count") = 500,
        "Keyword-decayed reciprocal rank fusion. Each list is (retriever, keyword_position, [(nct_id, score)]).");
  m.def("bm25", &bm25, py::arg("documents"), py::arg("query"), "BM25 scores for (id, text) documents.");
  m.def("parse_matching_response", &parse_matching, py::arg("text"), py::arg("expected"), py::arg("side"),
        py::arg("sentences"));
  m.def("combine", &combine, py::arg("met_inc"), py::arg("unmet_inc"), py::arg("met_exc"), py::arg("relevance"),
        py::arg("eligibility"), "(combined_ranking, exclusion_score)");
  m.def(
      "ndcg_at_k",
      [](const std::vector<std::string>& run, const std::map<std::string, std::string>& labels, std::size_t k) {
        return eval::ndcg_at_k(run_from(run), judgments_from(labels), k);
      },
      py::arg("run"), py::arg("labels"), py::arg("k") = 10);
  m.def(
      "recall_at_k",
      [](const std::vector<std::string>& run, const std::map<std::string, std::string>& labels, std::size_t k) {
        return eval::recall_at_k(run_from(run), judgments_from(labels), k);
      },
      py::arg("run"), py::arg("labels"), py::arg("k"));
  m.def(
      "precision_at_k",
      [](const std::vector<std::string>& run, const std::map<std::string, std::string>& labels, std::size_t k) {
        return eval::precision_at_k(run_from(run), judgments_from(labels), k);
      },
      py::arg("run"), py::arg("labels"), py::arg("k") = 10);
  m.def("auroc", &eval::auroc, py::arg("scored"), "Mann-Whitney AUROC over (score, is_positive) pairs.");
  m.def("run_pipeline", &run_pipeline, py::arg("config"), py::arg("out_dir") = py::none(),
        py::arg("backend") = py::none(), py::arg("seed") = py::none());
  m.def("synth", &synth, py::arg("out_dir"), py::arg("patients") = 10, py::arg("trials") = 50, py::arg("seed") = 7,
        py::arg("label_noise") = 0.0, py::arg("aggregate_noise") = 0.0);
}
