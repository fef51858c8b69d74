#include "trialmatch/matching/types.hpp"

#include <algorithm>
#include <array>

#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"
#include "util/strings.hpp"

namespace trialmatch::matching {

namespace {

constexpr std::array<EligibilityLabel, 4> kInclusion = {
    EligibilityLabel::included, EligibilityLabel::not_included,
    EligibilityLabel::not_enough_information, EligibilityLabel::not_applicable};
constexpr std::array<EligibilityLabel, 4> kExclusion = {
    EligibilityLabel::excluded, EligibilityLabel::not_excluded,
    EligibilityLabel::not_enough_information, EligibilityLabel::not_applicable};

// Lowercase; '_' and '-' become spaces; whitespace collapsed; surrounding
// quotes and trailing periods removed.
std::string canonical(std::string_view text) {
  std::string s = util::to_lower(text);
  for (char& c : s) {
    if (c == '_' || c == '-') c = ' ';
  }
  s = util::normalize_whitespace(s);
  while (!s.empty() && (s.back() == '.' || s.back() == '"' || s.back() == '\'')) s.pop_back();
  while (!s.empty() && (s.front() == '"' || s.front() == '\'')) s.erase(0, 1);
  return util::normalize_whitespace(s);
}

}  // namespace

bool belongs_to(EligibilityLabel label, Side side) noexcept {
  auto set = labels_for(side);
  return std::find(set.begin(), set.end(), label) != set.end();
}

std::span<const EligibilityLabel> labels_for(Side side) noexcept {
  return side == Side::inclusion ? std::span<const EligibilityLabel>(kInclusion)
                                 : std::span<const EligibilityLabel>(kExclusion);
}

std::string_view to_string(EligibilityLabel label) noexcept {
  switch (label) {
    case EligibilityLabel::included: return "included";
    case EligibilityLabel::not_included: return "not_included";
    case EligibilityLabel::excluded: return "excluded";
    case EligibilityLabel::not_excluded: return "not_excluded";
    case EligibilityLabel::not_enough_information: return "not_enough_information";
    case EligibilityLabel::not_applicable: return "not_applicable";
  }
  return "not_enough_information";
}

std::string_view display_name(EligibilityLabel label) noexcept {
  switch (label) {
    case EligibilityLabel::included: return "included";
    case EligibilityLabel::not_included: return "not included";
    case EligibilityLabel::excluded: return "excluded";
    case EligibilityLabel::not_excluded: return "not excluded";
    case EligibilityLabel::not_enough_information: return "not enough information";
    case EligibilityLabel::not_applicable: return "not applicable";
  }
  return "not enough information";
}

std::optional<EligibilityLabel> parse_label(std::string_view text, Side side) {
  auto c = canonical(text);
  if (c == "no relevant information") c = "not enough information";
  for (auto label : labels_for(side)) {
    if (c == display_name(label)) return label;
  }
  return std::nullopt;
}

std::string_view to_string(ParseStatus status) noexcept {
  switch (status) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::repaired: return "repaired";
    case ParseStatus::failed: return "failed";
  }
  return "failed";
}

ParseStatus parse_status_from_string(std::string_view text) {
  if (text == "ok") return ParseStatus::ok;
  if (text == "repaired") return ParseStatus::repaired;
  if (text == "failed") return ParseStatus::failed;
  throw ParseError("unknown parse_status '" + std::string(text) + "'");
}

CriterionPrediction failed_prediction(std::size_t index, Side side) {
  return {index, side, {}, {}, EligibilityLabel::not_enough_information, ParseStatus::failed};
}

namespace {

nlohmann::json predictions_to_json(const std::vector<CriterionPrediction>& preds) {
  auto arr = nlohmann::json::array();
  for (const auto& p : preds) {
    arr.push_back({{"index", p.criterion_index},
                   {"explanation", p.explanation},
                   {"sentences", p.relevant_sentences},
                   {"label", to_string(p.label)},
                   {"parse_status", to_string(p.parse_status)}});
  }
  return arr;
}

std::vector<CriterionPrediction> predictions_from_json(const nlohmann::json& arr, Side side) {
  std::vector<CriterionPrediction> out;
  for (const auto& j : arr) {
    CriterionPrediction p;
    p.side = side;
    p.criterion_index = j.at("index").get<std::size_t>();
    p.explanation = j.at("explanation").get<std::string>();
    p.relevant_sentences = j.at("sentences").get<std::vector<std::size_t>>();
    auto label = parse_label(j.at("label").get<std::string>(), side);
    if (!label) throw ParseError("label '" + j.at("label").get<std::string>() + "' not valid for side");
    p.label = *label;
    p.parse_status = parse_status_from_string(j.at("parse_status").get<std::string>());
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const TrialMatchResult& result) {
  return {{"patient_id", result.patient_id},
          {"nct_id", result.nct_id},
          {"inclusion", predictions_to_json(result.inclusion_predictions)},
          {"exclusion", predictions_to_json(result.exclusion_predictions)}};
}

TrialMatchResult match_result_from_json(const nlohmann::json& j) {
  TrialMatchResult r;
  r.patient_id = j.at("patient_id").get<std::string>();
  r.nct_id = j.at("nct_id").get<std::string>();
  r.inclusion_predictions = predictions_from_json(j.at("inclusion"), Side::inclusion);
  r.exclusion_predictions = predictions_from_json(j.at("exclusion"), Side::exclusion);
  return r;
}

}  // namespace trialmatch::matching
