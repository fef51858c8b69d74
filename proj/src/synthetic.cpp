#include "trialmatch/synthetic.hpp"

#include <array>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "trialmatch/matching/types.hpp"
#include "trialmatch/retrieval/lexical_index.hpp"
#include "util/jsonl.hpp"

namespace trialmatch::synthetic {

using matching::EligibilityLabel;
using nlohmann::json;

namespace {

struct Condition {
  const char* name;
  const char* drug;
  const char* biomarker;
  const char* symptom;
};

constexpr std::array<Condition, 10> kConditions = {{
    {"glioblastoma", "temozolomide", "MGMT promoter methylation", "progressive headache"},
    {"asthma", "mepolizumab", "blood eosinophil count", "recurrent wheezing"},
    {"type 2 diabetes", "semaglutide", "HbA1c", "polyuria"},
    {"rheumatoid arthritis", "tofacitinib", "rheumatoid factor", "symmetric joint swelling"},
    {"heart failure", "sacubitril", "NT-proBNP", "exertional dyspnea"},
    {"melanoma", "pembrolizumab", "BRAF V600E mutation status", "a changing pigmented lesion"},
    {"chronic kidney disease", "dapagliflozin", "estimated glomerular filtration rate", "fatigue"},
    {"Parkinson disease", "levodopa", "dopamine transporter imaging", "resting tremor"},
    {"major depressive disorder", "esketamine", "PHQ-9 score", "persistent anhedonia"},
    {"COPD", "tiotropium", "spirometry FEV1", "chronic productive cough"},
}};

constexpr std::array<const char*, 4> kPhases = {"Phase 1", "Phase 2", "Phase 3", "Phase 2/3"};

// Sentence positions in every generated note.
constexpr std::size_t kAgeSentence = 0, kDiagnosisSentence = 1, kBiomarkerSentence = 2,
                      kTreatmentSentence = 3, kConsentSentence = 4;

/// Draws from raw mt19937_64 output so results do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

struct PredictionSpec {
  EligibilityLabel label;
  std::vector<std::size_t> sentences;
};

std::vector<std::size_t> evidence(Side side, std::size_t index) {
  if (side == Side::inclusion) {
    switch (index) {
      case 0: return {kDiagnosisSentence};
      case 1: return {kAgeSentence};
      case 2: return {kBiomarkerSentence};
      default: return {kConsentSentence};
    }
  }
  return index == 0 || index == 3 ? std::vector<std::size_t>{kTreatmentSentence}
                                  : std::vector<std::size_t>{};
}

std::string explanation(EligibilityLabel label, const std::string& criterion) {
  switch (label) {
    case EligibilityLabel::included:
      return "The note supports that the patient meets: " + criterion + ".";
    case EligibilityLabel::not_included:
      return "The note indicates the patient does not meet: " + criterion + ".";
    case EligibilityLabel::excluded:
      return "The note indicates the patient meets the exclusion criterion: " + criterion + ".";
    case EligibilityLabel::not_excluded:
      return "The note indicates the patient does not meet the exclusion criterion: " + criterion + ".";
    case EligibilityLabel::not_enough_information:
      return "The note does not mention anything about: " + criterion + ".";
    case EligibilityLabel::not_applicable:
      return "This criterion does not apply to the patient.";
  }
  return {};
}

EligibilityLabel pick(Rng& rng, std::initializer_list<std::pair<EligibilityLabel, double>> weights) {
  double u = rng.unit(), acc = 0;
  EligibilityLabel last = weights.begin()->first;
  for (const auto& [label, w] : weights) {
    acc += w;
    last = label;
    if (u < acc) return label;
  }
  return last;
}

std::vector<EligibilityLabel> true_inclusion(Rng& rng, TruthClass cls, std::size_t m) {
  std::vector<EligibilityLabel> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (cls == TruthClass::irrelevant) {
      out[i] = i == 0 ? EligibilityLabel::not_included
                      : pick(rng, {{EligibilityLabel::not_enough_information, 0.6},
                                   {EligibilityLabel::not_applicable, 0.4}});
    } else {
      // Diagnosis and age always met, so at least half the inclusion
      // criteria are met.
      out[i] = i < 2 ? EligibilityLabel::included
                     : pick(rng, {{EligibilityLabel::included, 0.75},
                                  {EligibilityLabel::not_enough_information, 0.25}});
    }
  }
  return out;
}

std::vector<EligibilityLabel> true_exclusion(Rng& rng, std::size_t n) {
  std::vector<EligibilityLabel> out(n);
  for (auto& l : out) {
    l = pick(rng, {{EligibilityLabel::not_excluded, 0.6},
                   {EligibilityLabel::not_enough_information, 0.3},
                   {EligibilityLabel::not_applicable, 0.1}});
  }
  return out;
}

std::pair<int, int> true_aggregates(Rng& rng, TruthClass cls) {
  switch (cls) {
    case TruthClass::eligible: {
      int r = rng.between(70, 100);
      return {r, rng.between(50, r)};
    }
    case TruthClass::excluded: return {rng.between(60, 80), rng.between(-60, -20)};
    case TruthClass::irrelevant: {
      int r = rng.between(0, 10);
      return {r, rng.between(-r / 2, r / 2)};
    }
  }
  return {0, 0};
}

std::string criteria_block(const char* header, const std::vector<std::string>& items) {
  std::string s = std::string(header) + ":\n";
  for (const auto& c : items) s += "  - " + c + "\n";
  return s;
}

std::string matching_response(const corpus::TrialRecord& trial, Side side,
                              const std::vector<PredictionSpec>& specs) {
  json j = json::object();
  const auto& criteria = trial.criteria(side);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    j[std::to_string(i)] = {{"explanation", explanation(specs[i].label, criteria[i].text)},
                            {"sentences", specs[i].sentences},
                            {"label", matching::display_name(specs[i].label)}};
  }
  return j.dump();
}

}  // namespace

SynthCohort generate(const SynthConfig& config) {
  Rng rng(config.seed);
  SynthCohort out;

  std::vector<std::size_t> trial_condition;
  for (std::size_t i = 0; i < config.trials; ++i) {
    const auto c = i % kConditions.size();
    const auto& cond = kConditions[c];
    trial_condition.push_back(c);
    std::vector<std::string> inc = {fmt::format("Diagnosis of {}", cond.name),
                                    "Age 18 years or older",
                                    fmt::format("{} documented at screening", cond.biomarker),
                                    "Able to provide written informed consent"};
    std::vector<std::string> exc = {fmt::format("Prior treatment with {}", cond.drug),
                                    "Pregnant or breastfeeding",
                                    "Active uncontrolled infection"};
    if (rng.chance(0.5)) exc.push_back(fmt::format("Known hypersensitivity to {}", cond.drug));
    json tj{{"nct_id", fmt::format("NCT{:08}", 1000 + i * 7)},
            {"title", fmt::format("{} Study of {} in Patients With {}", kPhases[rng.below(kPhases.size())],
                                  cond.drug, cond.name)},
            {"conditions", {cond.name}},
            {"interventions", {cond.drug}},
            {"brief_summary", fmt::format("This study evaluates {} in adults with {}.", cond.drug, cond.name)},
            {"inclusion_criteria", criteria_block("Inclusion Criteria", inc)},
            {"exclusion_criteria", criteria_block("Exclusion Criteria", exc)}};
    out.trials.push_back(corpus::trial_from_json(tj));
  }

  std::vector<std::size_t> patient_condition;
  for (std::size_t j = 0; j < config.patients; ++j) {
    const auto c = rng.below(kConditions.size());
    const auto& cond = kConditions[c];
    patient_condition.push_back(c);
    auto text = fmt::format(
        "A {}-year-old {} presents with {}. The patient was diagnosed with {} {} months ago. "
        "Recent laboratory work included {}. There is no documented history of treatment with {}. "
        "The patient is able to provide informed consent.",
        rng.between(25, 80), rng.chance(0.5) ? "woman" : "man", cond.symptom, cond.name,
        rng.between(2, 36), cond.biomarker, cond.drug);
    out.patients.push_back(corpus::make_patient_note(fmt::format("P{:03}", j + 1), text));

    out.fixtures.push_back(
        {{}, {}, {{"task", "keywords"}, {"patient_id", out.patients.back().patient_id}},
         json{{"keywords", {cond.name, cond.symptom, cond.biomarker}}}.dump()});
  }

  const std::array<EligibilityLabel, 4> any_inc = {EligibilityLabel::included, EligibilityLabel::not_included,
                                                   EligibilityLabel::not_enough_information,
                                                   EligibilityLabel::not_applicable};
  const std::array<EligibilityLabel, 4> any_exc = {EligibilityLabel::excluded, EligibilityLabel::not_excluded,
                                                   EligibilityLabel::not_enough_information,
                                                   EligibilityLabel::not_applicable};

  for (std::size_t j = 0; j < out.patients.size(); ++j) {
    const auto& note = out.patients[j];
    for (std::size_t i = 0; i < out.trials.size(); ++i) {
      const auto& trial = out.trials[i];
      TruthClass cls = TruthClass::irrelevant;
      if (patient_condition[j] == trial_condition[i]) {
        cls = rng.chance(0.5) ? TruthClass::eligible : TruthClass::excluded;
      }
      out.truth[{note.patient_id, trial.nct_id}] = cls;
      corpus::RelevanceLabel rl = cls == TruthClass::eligible   ? corpus::RelevanceLabel::eligible
                                  : cls == TruthClass::excluded ? corpus::RelevanceLabel::excluded
                                                                : corpus::RelevanceLabel::irrelevant;
      out.judgments.push_back({note.patient_id, trial.nct_id, rl, corpus::grade(rl)});

      auto inc = true_inclusion(rng, cls, trial.inclusion_criteria.size());
      auto exc = true_exclusion(rng, trial.exclusion_criteria.size());
      if (cls == TruthClass::excluded) {
        // Exactly one disqualifying signal: an unmet non-core inclusion
        // criterion or a met exclusion criterion.
        if (rng.chance(0.5)) {
          inc[2 + rng.below(inc.size() - 2)] = EligibilityLabel::not_included;
        } else {
          exc[rng.below(exc.size())] = EligibilityLabel::excluded;
        }
      }

      auto specs = [&](std::vector<EligibilityLabel>& labels, Side side, const auto& pool) {
        std::vector<PredictionSpec> s;
        for (std::size_t k = 0; k < labels.size(); ++k) {
          if (config.label_noise > 0 && rng.chance(config.label_noise)) labels[k] = pool[rng.below(pool.size())];
          bool cited = labels[k] != EligibilityLabel::not_enough_information &&
                       labels[k] != EligibilityLabel::not_applicable;
          s.push_back({labels[k], cited ? evidence(side, k) : std::vector<std::size_t>{}});
        }
        return s;
      };
      auto inc_specs = specs(inc, Side::inclusion, any_inc);
      auto exc_specs = specs(exc, Side::exclusion, any_exc);

      auto [r, s] = true_aggregates(rng, cls);
      if (config.aggregate_noise > 0 && rng.chance(config.aggregate_noise)) {
        std::tie(r, s) = true_aggregates(rng, static_cast<TruthClass>(rng.below(3)));
      }

      const std::string pid = note.patient_id, nct = trial.nct_id;
      out.fixtures.push_back({{}, {},
                              {{"task", "matching"}, {"patient_id", pid}, {"nct_id", nct}, {"side", "inclusion"}},
                              matching_response(trial, Side::inclusion, inc_specs)});
      out.fixtures.push_back({{}, {},
                              {{"task", "matching"}, {"patient_id", pid}, {"nct_id", nct}, {"side", "exclusion"}},
                              matching_response(trial, Side::exclusion, exc_specs)});
      out.fixtures.push_back({{}, {},
                              {{"task", "aggregation"}, {"patient_id", pid}, {"nct_id", nct}},
                              json{{"relevance_score_R", r}, {"eligibility_score_S", s}}.dump()});
    }
  }

  retrieval::HashEmbeddingProvider encoder(config.embedding_dimension);
  out.trial_embeddings.dimension = config.embedding_dimension;
  for (const auto& t : out.trials) {
    out.trial_embeddings.ids.push_back(t.nct_id);
    out.trial_embeddings.vectors.push_back(encoder.embed(retrieval::trial_document_text(t)));
  }
  return out;
}

void write_cohort(const SynthCohort& cohort, const std::filesystem::path& dir, std::uint64_t seed) {
  {
    // Criterion blocks are written as raw text so ingest exercises the
    // segmenter.
    auto out = util::open_output(dir / "trials.jsonl");
    for (const auto& t : cohort.trials) {
      auto j = corpus::trial_to_json(t);
      std::vector<std::string> inc, exc;
      for (const auto& c : t.inclusion_criteria) inc.push_back(c.text);
      for (const auto& c : t.exclusion_criteria) exc.push_back(c.text);
      j["inclusion_criteria"] = criteria_block("Inclusion Criteria", inc);
      j["exclusion_criteria"] = criteria_block("Exclusion Criteria", exc);
      out << util::dump_line(j) << '\n';
    }
  }
  {
    auto out = util::open_output(dir / "patients.jsonl");
    for (const auto& p : cohort.patients) {
      out << util::dump_line(json{{"patient_id", p.patient_id}, {"text", p.raw_text}}) << '\n';
    }
  }
  {
    auto out = util::open_output(dir / "qrels.txt");
    for (const auto& j : cohort.judgments) {
      out << j.patient_id << " 0 " << j.nct_id << ' ' << j.grade << '\n';
    }
  }
  {
    auto out = util::open_output(dir / "trial_embeddings.jsonl");
    retrieval::write_embeddings(out, cohort.trial_embeddings);
  }
  {
    auto out = util::open_output(dir / "mock_responses.jsonl");
    for (const auto& f : cohort.fixtures) out << llm::fixture_line(f) << '\n';
  }
  {
    auto out = util::open_output(dir / "pipeline.toml");
    out << "# Synthetic cohort generated with seed " << seed << ".\n"
        << "cohort_name = \"synthetic\"\n"
        << "label_vocabulary = \"trec\"\n"
        << "trials = \"trials.jsonl\"\n"
        << "patients = \"patients.jsonl\"\n"
        << "qrels = \"qrels.txt\"\n"
        << "embeddings = \"trial_embeddings.jsonl\"\n"
        << "mock_fixtures = \"mock_responses.jsonl\"\n"
        << "backend = \"mock\"\n"
        << "seed = " << seed << "\n"
        << "top = 500\n"
        << "hash_dimension = " << cohort.trial_embeddings.dimension << "\n";
  }
}

}  // namespace trialmatch::synthetic
