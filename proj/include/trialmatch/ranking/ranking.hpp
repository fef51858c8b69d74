#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trialmatch/corpus.hpp"
#include "trialmatch/llm/gateway.hpp"
#include "trialmatch/matching/types.hpp"

namespace trialmatch::ranking {

/// Per-side label fractions over the effective (applicable) criterion count.
struct LinearAggregates {
  double pct_met_inclusion = 0;
  double pct_unmet_inclusion = 0;
  double pct_noinfo_inclusion = 0;
  double pct_met_exclusion = 0;
  double pct_unmet_exclusion = 0;
  double pct_noinfo_exclusion = 0;
  std::size_t m_effective = 0;
  std::size_t n_effective = 0;

  bool operator==(const LinearAggregates&) const = default;
};

/// Relevance R in [0, 100] and eligibility S in [-R, R].
struct LlmAggregates {
  double relevance = 0;
  double eligibility = 0;
  std::string raw_response;
  bool clamped = false;
  bool parse_failed = false;

  bool operator==(const LlmAggregates&) const = default;
};

struct TrialScore {
  std::string patient_id;
  std::string nct_id;
  LinearAggregates linear;
  LlmAggregates llm;
  double combined_ranking = 0;
  double exclusion_score = 0;

  bool operator==(const TrialScore&) const = default;
};

LinearAggregates linear_aggregate(const matching::TrialMatchResult& result);

llm::Prompt build_aggregation_prompt(const corpus::PatientNote& note,
                                     const corpus::TrialRecord& trial,
                                     const matching::TrialMatchResult& result);

/// Reads {"relevance_score_R", "eligibility_score_S"}, clamping R to
/// [0, 100] first and then S to [-R, R]. Unreadable or non-finite values
/// give (0, 0) with clamped and parse_failed set.
LlmAggregates parse_aggregation_response(const std::string& text);

LlmAggregates llm_aggregate(const corpus::PatientNote& note, const corpus::TrialRecord& trial,
                            const matching::TrialMatchResult& result, llm::Gateway& gateway);

/// Returns (combined_ranking, exclusion_score = -combined_ranking).
/// The LLM scores enter as R/100 and S/100.
std::pair<double, double> combine(const LinearAggregates& linear, const LlmAggregates& llm);

TrialScore make_trial_score(const matching::TrialMatchResult& result, LlmAggregates llm);

enum class Feature { met_inc, not_inc, excl, not_excl, relevance, eligibility, combination };

std::string_view to_string(Feature feature) noexcept;
Feature feature_from_string(std::string_view text);
const std::vector<Feature>& all_features();

/// The feature value with its ranking sign applied (not_inc and excl are
/// negated), so larger always means a better candidate.
double signed_feature(const TrialScore& score, Feature feature);

/// NCT IDs sorted by the signed feature, descending, ties by nct_id.
std::vector<std::string> rank_trials(const std::vector<TrialScore>& scores, Feature feature);

/// Same order, with the signed feature value as score.
std::vector<std::pair<std::string, double>> ranked_scores(const std::vector<TrialScore>& scores,
                                                          Feature feature);

struct ScoreCohortOptions {
  std::size_t parallelism = 4;
};

/// Linear plus LLM aggregation for every match result. Output sorted by
/// (patient_id, nct_id). Pairs whose note or trial is missing are an error.
std::vector<TrialScore> score_matches(const std::vector<corpus::PatientNote>& patients,
                                      const std::vector<corpus::TrialRecord>& trials,
                                      const std::vector<matching::TrialMatchResult>& matches,
                                      llm::Gateway& gateway, const ScoreCohortOptions& options = {});

nlohmann::json to_json(const TrialScore& score);
TrialScore trial_score_from_json(const nlohmann::json& j);
void write_scores(const std::filesystem::path& path, const std::vector<TrialScore>& scores);
std::vector<TrialScore> load_scores(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Baselines. Encoder vectors and NLI labels are inputs; only the
// aggregation arithmetic lives here.

struct BaselineCriterionVectors {
  std::vector<double> patient_vector;
  std::vector<std::vector<double>> inclusion_vectors;
  std::vector<std::vector<double>> exclusion_vectors;
};

/// (ranking, excluding): mean inclusion similarity minus mean exclusion
/// similarity, and mean exclusion similarity. An empty side contributes 0.
std::pair<double, double> baseline_dual_encoder_scores(const BaselineCriterionVectors& vectors);

enum class NliLabel { entailment, contradiction, neutral };

NliLabel nli_label_from_string(std::string_view text);
matching::EligibilityLabel baseline_label_map(NliLabel label, Side side) noexcept;

/// (ranking, excluding) from label fractions:
///   met_inc - unmet_inc - met_exc + unmet_exc
///   [unmet_inc > 0] + [met_exc > 0] - met_inc
std::pair<double, double> baseline_combination(const LinearAggregates& linear);

struct BaselineVectorsRecord {
  std::string patient_id;
  std::string nct_id;
  BaselineCriterionVectors vectors;
};

struct BaselineNliRecord {
  std::string patient_id;
  std::string nct_id;
  std::vector<NliLabel> inclusion;
  std::vector<NliLabel> exclusion;
};

/// {"patient_id", "nct_id", "patient": [...], "inclusion": [[...]], "exclusion": [[...]]}
std::vector<BaselineVectorsRecord> load_baseline_vectors(const std::filesystem::path& path);
/// {"patient_id", "nct_id", "inclusion": ["entailment", ...], "exclusion": [...]}
std::vector<BaselineNliRecord> load_baseline_nli(const std::filesystem::path& path);

/// Mapped labels wrapped as a match result so linear_aggregate applies.
matching::TrialMatchResult nli_as_match_result(const BaselineNliRecord& record);

}  // namespace trialmatch::ranking
