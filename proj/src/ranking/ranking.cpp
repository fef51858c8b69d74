#include "trialmatch/ranking/ranking.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"
#include "trialmatch/llm/structured.hpp"
#include "util/jsonl.hpp"

namespace trialmatch::ranking {

using matching::EligibilityLabel;
using matching::ParseStatus;
using nlohmann::json;

namespace {

struct SideCounts {
  std::size_t met = 0, unmet = 0, noinfo = 0;
  std::size_t effective() const { return met + unmet + noinfo; }
};

SideCounts count(const std::vector<matching::CriterionPrediction>& preds, EligibilityLabel met,
                 EligibilityLabel unmet) {
  SideCounts c;
  for (const auto& p : preds) {
    auto label = p.parse_status == ParseStatus::failed ? EligibilityLabel::not_enough_information
                                                       : p.label;
    if (label == EligibilityLabel::not_applicable) continue;
    if (label == met) {
      ++c.met;
    } else if (label == unmet) {
      ++c.unmet;
    } else {
      ++c.noinfo;
    }
  }
  return c;
}

double frac(std::size_t k, std::size_t n) {
  return n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(n);
}

}  // namespace

LinearAggregates linear_aggregate(const matching::TrialMatchResult& result) {
  auto inc = count(result.inclusion_predictions, EligibilityLabel::included,
                   EligibilityLabel::not_included);
  auto exc = count(result.exclusion_predictions, EligibilityLabel::excluded,
                   EligibilityLabel::not_excluded);
  LinearAggregates a;
  a.m_effective = inc.effective();
  a.n_effective = exc.effective();
  a.pct_met_inclusion = frac(inc.met, a.m_effective);
  a.pct_unmet_inclusion = frac(inc.unmet, a.m_effective);
  a.pct_noinfo_inclusion = frac(inc.noinfo, a.m_effective);
  a.pct_met_exclusion = frac(exc.met, a.n_effective);
  a.pct_unmet_exclusion = frac(exc.unmet, a.n_effective);
  a.pct_noinfo_exclusion = frac(exc.noinfo, a.n_effective);
  return a;
}

// ---------------------------------------------------------------------------
// LLM aggregation

namespace {

void render_predictions(std::ostringstream& u, const corpus::TrialRecord& trial,
                        const matching::TrialMatchResult& result, Side side) {
  const auto& criteria = trial.criteria(side);
  const auto& preds = result.predictions(side);
  std::string name(to_string(side));
  u << '\n' << (side == Side::inclusion ? "Inclusion" : "Exclusion") << " criteria:\n";
  if (preds.empty()) u << "(none)\n";
  for (const auto& p : preds) {
    u << p.criterion_index << ". ";
    if (p.criterion_index < criteria.size()) u << criteria[p.criterion_index].text;
    u << "\n   Label: " << matching::display_name(p.label);
    if (p.parse_status == ParseStatus::failed) u << " (prediction unavailable)";
    u << "\n   Explanation: " << p.explanation;
    u << "\n   Relevant sentences: [";
    for (std::size_t i = 0; i < p.relevant_sentences.size(); ++i) {
      u << (i ? ", " : "") << p.relevant_sentences[i];
    }
    u << "]\n";
  }
}

std::optional<double> number(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  double v;
  if (it->is_number()) {
    v = it->get<double>();
  } else if (it->is_string()) {
    const auto& s = it->get_ref<const std::string&>();
    try {
      std::size_t used = 0;
      v = std::stod(s, &used);
      if (!util::trim(std::string_view(s).substr(used)).empty()) return std::nullopt;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  } else {
    return std::nullopt;
  }
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

llm::Prompt build_aggregation_prompt(const corpus::PatientNote& note,
                                     const corpus::TrialRecord& trial,
                                     const matching::TrialMatchResult& result) {
  std::ostringstream u;
  u << llm::format_request_header(
           {{"task", "aggregation"}, {"patient_id", note.patient_id}, {"nct_id", trial.nct_id}})
    << "\n\nPatient note:\n";
  for (std::size_t i = 0; i < note.sentences.size(); ++i) u << i << ". " << note.sentences[i] << '\n';
  u << "\nClinical trial " << trial.nct_id << ": " << trial.title << '\n';
  render_predictions(u, trial, result, Side::inclusion);
  render_predictions(u, trial, result, Side::exclusion);
  u << "\nUsing the criterion-level predictions above, score the patient against the whole trial.\n"
       "- relevance_score_R: how relevant the patient is to the trial, from 0 (irrelevant) to "
       "100 (fully relevant).\n"
       "- eligibility_score_S: how eligible the patient is, from -R (excluded) to R (eligible). "
       "Its absolute value cannot exceed R, and it is 0 when eligibility cannot be decided.\n"
       "\nRespond with only a JSON object: {\"relevance_score_R\": <number>, "
       "\"eligibility_score_S\": <number>}.";
  return {"You are a helpful assistant for clinical trial recruitment. You will be given a patient "
          "note, a clinical trial, and the patient's eligibility predictions for each of the "
          "trial's criteria.",
          u.str()};
}

LlmAggregates parse_aggregation_response(const std::string& text) {
  LlmAggregates out;
  out.raw_response = text;
  auto parsed = llm::parse_json_object(text);
  std::optional<double> r, s;
  if (parsed) {
    r = number(parsed->value, "relevance_score_R");
    s = number(parsed->value, "eligibility_score_S");
  }
  if (!r || !s) {
    out.clamped = true;
    out.parse_failed = true;
    return out;
  }
  out.relevance = std::clamp(*r, 0.0, 100.0);
  out.eligibility = std::clamp(*s, -out.relevance, out.relevance);
  out.clamped = out.relevance != *r || out.eligibility != *s;
  return out;
}

LlmAggregates llm_aggregate(const corpus::PatientNote& note, const corpus::TrialRecord& trial,
                            const matching::TrialMatchResult& result, llm::Gateway& gateway) {
  auto prompt = build_aggregation_prompt(note, trial, result);
  auto response = gateway.complete(gateway.make_request(prompt.system, prompt.user));
  return parse_aggregation_response(response.text);
}

std::pair<double, double> combine(const LinearAggregates& linear, const LlmAggregates& llm) {
  double c = linear.pct_met_inclusion - (linear.pct_unmet_inclusion > 0 ? 1.0 : 0.0) -
             (linear.pct_met_exclusion > 0 ? 1.0 : 0.0) + llm.relevance / 100.0 +
             llm.eligibility / 100.0;
  return {c, -c};
}

TrialScore make_trial_score(const matching::TrialMatchResult& result, LlmAggregates llm) {
  TrialScore s;
  s.patient_id = result.patient_id;
  s.nct_id = result.nct_id;
  s.linear = linear_aggregate(result);
  s.llm = std::move(llm);
  std::tie(s.combined_ranking, s.exclusion_score) = combine(s.linear, s.llm);
  return s;
}

// ---------------------------------------------------------------------------
// Features

std::string_view to_string(Feature feature) noexcept {
  switch (feature) {
    case Feature::met_inc: return "met_inc";
    case Feature::not_inc: return "not_inc";
    case Feature::excl: return "excl";
    case Feature::not_excl: return "not_excl";
    case Feature::relevance: return "relevance";
    case Feature::eligibility: return "eligibility";
    case Feature::combination: return "combination";
  }
  return "combination";
}

const std::vector<Feature>& all_features() {
  static const std::vector<Feature> kAll = {Feature::met_inc,   Feature::not_inc,
                                            Feature::excl,      Feature::not_excl,
                                            Feature::relevance, Feature::eligibility,
                                            Feature::combination};
  return kAll;
}

Feature feature_from_string(std::string_view text) {
  for (auto f : all_features()) {
    if (to_string(f) == text) return f;
  }
  throw ConfigError("unknown ranking feature '" + std::string(text) +
                    "' (expected met_inc, not_inc, excl, not_excl, relevance, eligibility or "
                    "combination)");
}

double signed_feature(const TrialScore& s, Feature feature) {
  switch (feature) {
    case Feature::met_inc: return s.linear.pct_met_inclusion;
    case Feature::not_inc: return -s.linear.pct_unmet_inclusion;
    case Feature::excl: return -s.linear.pct_met_exclusion;
    case Feature::not_excl: return s.linear.pct_unmet_exclusion;
    case Feature::relevance: return s.llm.relevance;
    case Feature::eligibility: return s.llm.eligibility;
    case Feature::combination: return s.combined_ranking;
  }
  throw ConfigError("unknown ranking feature");
}

std::vector<std::pair<std::string, double>> ranked_scores(const std::vector<TrialScore>& scores,
                                                          Feature feature) {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.emplace_back(s.nct_id, signed_feature(s, feature));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

std::vector<std::string> rank_trials(const std::vector<TrialScore>& scores, Feature feature) {
  std::vector<std::string> ids;
  for (auto& [id, v] : ranked_scores(scores, feature)) ids.push_back(std::move(id));
  return ids;
}

std::vector<TrialScore> score_matches(const std::vector<corpus::PatientNote>& patients,
                                      const std::vector<corpus::TrialRecord>& trials,
                                      const std::vector<matching::TrialMatchResult>& matches,
                                      llm::Gateway& gateway, const ScoreCohortOptions& options) {
  std::unordered_map<std::string, const corpus::PatientNote*> by_patient;
  for (const auto& p : patients) by_patient[p.patient_id] = &p;
  std::unordered_map<std::string, const corpus::TrialRecord*> by_trial;
  for (const auto& t : trials) by_trial[t.nct_id] = &t;
  for (const auto& m : matches) {
    if (!by_patient.contains(m.patient_id)) throw Error("match for unknown patient " + m.patient_id);
    if (!by_trial.contains(m.nct_id)) throw Error("match for unknown trial " + m.nct_id);
  }

  std::vector<TrialScore> out(matches.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr error;
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= matches.size()) return;
      const auto& m = matches[i];
      try {
        out[i] = make_trial_score(
            m, llm_aggregate(*by_patient.at(m.patient_id), *by_trial.at(m.nct_id), m, gateway));
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!error) error = std::current_exception();
        next = matches.size();
      }
    }
  };
  {
    std::vector<std::jthread> workers;
    auto n = std::max<std::size_t>(1, std::min(options.parallelism, matches.size()));
    for (std::size_t w = 0; w < n; ++w) workers.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);

  std::sort(out.begin(), out.end(), [](const TrialScore& a, const TrialScore& b) {
    return std::tie(a.patient_id, a.nct_id) < std::tie(b.patient_id, b.nct_id);
  });
  return out;
}

// ---------------------------------------------------------------------------
// scores.jsonl

json to_json(const TrialScore& s) {
  return {{"patient_id", s.patient_id},
          {"nct_id", s.nct_id},
          {"pct_met_inclusion", s.linear.pct_met_inclusion},
          {"pct_unmet_inclusion", s.linear.pct_unmet_inclusion},
          {"pct_noinfo_inclusion", s.linear.pct_noinfo_inclusion},
          {"pct_met_exclusion", s.linear.pct_met_exclusion},
          {"pct_unmet_exclusion", s.linear.pct_unmet_exclusion},
          {"pct_noinfo_exclusion", s.linear.pct_noinfo_exclusion},
          {"m_effective", s.linear.m_effective},
          {"n_effective", s.linear.n_effective},
          {"relevance", s.llm.relevance},
          {"eligibility", s.llm.eligibility},
          {"clamped", s.llm.clamped},
          {"parse_failed", s.llm.parse_failed},
          {"llm_response", s.llm.raw_response},
          {"combined_ranking", s.combined_ranking},
          {"exclusion_score", s.exclusion_score}};
}

TrialScore trial_score_from_json(const json& j) {
  TrialScore s;
  s.patient_id = j.at("patient_id").get<std::string>();
  s.nct_id = j.at("nct_id").get<std::string>();
  s.linear.pct_met_inclusion = j.at("pct_met_inclusion").get<double>();
  s.linear.pct_unmet_inclusion = j.at("pct_unmet_inclusion").get<double>();
  s.linear.pct_noinfo_inclusion = j.at("pct_noinfo_inclusion").get<double>();
  s.linear.pct_met_exclusion = j.at("pct_met_exclusion").get<double>();
  s.linear.pct_unmet_exclusion = j.at("pct_unmet_exclusion").get<double>();
  s.linear.pct_noinfo_exclusion = j.at("pct_noinfo_exclusion").get<double>();
  s.linear.m_effective = j.at("m_effective").get<std::size_t>();
  s.linear.n_effective = j.at("n_effective").get<std::size_t>();
  s.llm.relevance = j.at("relevance").get<double>();
  s.llm.eligibility = j.at("eligibility").get<double>();
  s.llm.clamped = j.value("clamped", false);
  s.llm.parse_failed = j.value("parse_failed", false);
  s.llm.raw_response = j.value("llm_response", "");
  s.combined_ranking = j.at("combined_ranking").get<double>();
  s.exclusion_score = j.at("exclusion_score").get<double>();
  return s;
}

void write_scores(const std::filesystem::path& path, const std::vector<TrialScore>& scores) {
  auto out = util::open_output(path);
  for (const auto& s : scores) out << util::dump_line(to_json(s)) << '\n';
}

std::vector<TrialScore> load_scores(const std::filesystem::path& path) {
  std::vector<TrialScore> out;
  auto in = util::open_input(path);
  util::for_each_jsonl(in, [&](const json& j, std::size_t line_no) {
    try {
      out.push_back(trial_score_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad score record: ") + e.what(), line_no);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Baselines

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error("vector dimension mismatch: " + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()));
  }
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double mean_similarity(const std::vector<double>& p, const std::vector<std::vector<double>>& vs) {
  if (vs.empty()) return 0.0;
  double s = 0;
  for (const auto& v : vs) s += dot(p, v);
  return s / static_cast<double>(vs.size());
}

}  // namespace

std::pair<double, double> baseline_dual_encoder_scores(const BaselineCriterionVectors& v) {
  double inc = mean_similarity(v.patient_vector, v.inclusion_vectors);
  double exc = mean_similarity(v.patient_vector, v.exclusion_vectors);
  return {inc - exc, exc};
}

NliLabel nli_label_from_string(std::string_view text) {
  if (text == "entailment") return NliLabel::entailment;
  if (text == "contradiction") return NliLabel::contradiction;
  if (text == "neutral") return NliLabel::neutral;
  throw ParseError("unknown NLI label '" + std::string(text) + "'");
}

EligibilityLabel baseline_label_map(NliLabel label, Side side) noexcept {
  switch (label) {
    case NliLabel::entailment:
      return side == Side::inclusion ? EligibilityLabel::included : EligibilityLabel::excluded;
    case NliLabel::contradiction:
      return side == Side::inclusion ? EligibilityLabel::not_included
                                     : EligibilityLabel::not_excluded;
    case NliLabel::neutral: return EligibilityLabel::not_enough_information;
  }
  return EligibilityLabel::not_enough_information;
}

std::pair<double, double> baseline_combination(const LinearAggregates& a) {
  double ranking = a.pct_met_inclusion - a.pct_unmet_inclusion - a.pct_met_exclusion +
                   a.pct_unmet_exclusion;
  double excluding = (a.pct_unmet_inclusion > 0 ? 1.0 : 0.0) +
                     (a.pct_met_exclusion > 0 ? 1.0 : 0.0) - a.pct_met_inclusion;
  return {ranking, excluding};
}

std::vector<BaselineVectorsRecord> load_baseline_vectors(const std::filesystem::path& path) {
  std::vector<BaselineVectorsRecord> out;
  auto in = util::open_input(path);
  util::for_each_jsonl(in, [&](const json& j, std::size_t line_no) {
    try {
      BaselineVectorsRecord r;
      r.patient_id = j.at("patient_id").get<std::string>();
      r.nct_id = j.at("nct_id").get<std::string>();
      r.vectors.patient_vector = j.at("patient").get<std::vector<double>>();
      r.vectors.inclusion_vectors = j.value("inclusion", std::vector<std::vector<double>>{});
      r.vectors.exclusion_vectors = j.value("exclusion", std::vector<std::vector<double>>{});
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad baseline vector record: ") + e.what(), line_no);
    }
  });
  return out;
}

std::vector<BaselineNliRecord> load_baseline_nli(const std::filesystem::path& path) {
  std::vector<BaselineNliRecord> out;
  auto in = util::open_input(path);
  util::for_each_jsonl(in, [&](const json& j, std::size_t line_no) {
    try {
      BaselineNliRecord r;
      r.patient_id = j.at("patient_id").get<std::string>();
      r.nct_id = j.at("nct_id").get<std::string>();
      for (const auto& s : j.value("inclusion", std::vector<std::string>{})) {
        r.inclusion.push_back(nli_label_from_string(s));
      }
      for (const auto& s : j.value("exclusion", std::vector<std::string>{})) {
        r.exclusion.push_back(nli_label_from_string(s));
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad baseline NLI record: ") + e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  });
  return out;
}

matching::TrialMatchResult nli_as_match_result(const BaselineNliRecord& record) {
  matching::TrialMatchResult r;
  r.patient_id = record.patient_id;
  r.nct_id = record.nct_id;
  auto fill = [](const std::vector<NliLabel>& labels, Side side) {
    std::vector<matching::CriterionPrediction> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out.push_back({i, side, {}, {}, baseline_label_map(labels[i], side), ParseStatus::ok});
    }
    return out;
  };
  r.inclusion_predictions = fill(record.inclusion, Side::inclusion);
  r.exclusion_predictions = fill(record.exclusion, Side::exclusion);
  return r;
}

}  // namespace trialmatch::ranking
