#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trialmatch/corpus.hpp"

namespace trialmatch::matching {

/// Criterion-level eligibility. Inclusion criteria draw from {included,
/// not_included, not_enough_information, not_applicable}; exclusion
/// criteria from {excluded, not_excluded, not_enough_information,
/// not_applicable}.
enum class EligibilityLabel {
  included,
  not_included,
  excluded,
  not_excluded,
  not_enough_information,
  not_applicable,
};

bool belongs_to(EligibilityLabel label, Side side) noexcept;
std::span<const EligibilityLabel> labels_for(Side side) noexcept;

/// snake_case identifier used in artifacts, e.g. "not_included".
std::string_view to_string(EligibilityLabel label) noexcept;
/// Plain wording used in prompts, e.g. "not included".
std::string_view display_name(EligibilityLabel label) noexcept;

/// Case- and separator-insensitive; "no relevant information" is accepted
/// for not_enough_information. Labels from the other side are rejected.
std::optional<EligibilityLabel> parse_label(std::string_view text, Side side);

enum class ParseStatus { ok, repaired, failed };

std::string_view to_string(ParseStatus status) noexcept;
ParseStatus parse_status_from_string(std::string_view text);

struct CriterionPrediction {
  std::size_t criterion_index = 0;
  Side side = Side::inclusion;
  std::string explanation;
  std::vector<std::size_t> relevant_sentences;  // sorted, unique, < P
  EligibilityLabel label = EligibilityLabel::not_enough_information;
  ParseStatus parse_status = ParseStatus::failed;

  bool operator==(const CriterionPrediction&) const = default;
};

/// Fallback for an unreadable answer: no information, no evidence.
CriterionPrediction failed_prediction(std::size_t index, Side side);

struct TrialMatchResult {
  std::string patient_id;
  std::string nct_id;
  std::vector<CriterionPrediction> inclusion_predictions;
  std::vector<CriterionPrediction> exclusion_predictions;
  std::size_t gateway_calls = 0;  // not serialized

  const std::vector<CriterionPrediction>& predictions(Side side) const {
    return side == Side::inclusion ? inclusion_predictions : exclusion_predictions;
  }

  bool operator==(const TrialMatchResult& o) const {
    return patient_id == o.patient_id && nct_id == o.nct_id &&
           inclusion_predictions == o.inclusion_predictions &&
           exclusion_predictions == o.exclusion_predictions;
  }
};

nlohmann::json to_json(const TrialMatchResult& result);
TrialMatchResult match_result_from_json(const nlohmann::json& j);

}  // namespace trialmatch::matching
