#pragma once

// Random damage to well-formed matching responses, and the invariant check
// every parsed prediction list must pass regardless of the damage.

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "trialmatch/matching/types.hpp"

namespace testing_support {

inline std::string random_label(Gen& g, trialmatch::Side side) {
  static const std::vector<std::string> pool = {
      "included", "not included", "Not_Included", "EXCLUDED", "not excluded", "not-excluded",
      "not enough information", "no relevant information", "not applicable", "N/A", "eligible",
      "maybe", "", "included.", "Included ", "exclude", "yes"};
  if (g.below(4) == 0) {
    auto labels = trialmatch::matching::labels_for(side);
    return std::string(trialmatch::matching::display_name(labels[g.below(labels.size())]));
  }
  return pool[g.below(pool.size())];
}

inline nlohmann::json random_sentences(Gen& g, std::size_t sentence_count) {
  nlohmann::json arr = nlohmann::json::array();
  const std::size_t n = g.below(5);
  for (std::size_t i = 0; i < n; ++i) {
    switch (g.below(8)) {
      case 0: arr.push_back(-static_cast<int>(g.below(5)) - 1); break;
      case 1: arr.push_back(sentence_count + g.below(10)); break;
      case 2: arr.push_back(std::to_string(g.below(sentence_count + 3))); break;
      case 3: arr.push_back(static_cast<double>(g.below(sentence_count)) + (g.coin() ? 0.5 : 0.0)); break;
      case 4: arr.push_back(nullptr); break;
      case 5: arr.push_back("s" + std::to_string(g.below(3))); break;
      default: arr.push_back(g.below(sentence_count + 1)); break;
    }
  }
  return arr;
}

/// A response for `expected` criteria with structural and lexical damage.
inline std::string mutilated_response(Gen& g, std::size_t expected, trialmatch::Side side,
                                      std::size_t sentence_count) {
  nlohmann::json j = nlohmann::json::object();
  const std::size_t emitted = expected + g.below(3) - (expected > 0 ? g.below(2) : 0);
  for (std::size_t i = 0; i < emitted; ++i) {
    nlohmann::json entry = nlohmann::json::object();
    if (g.below(6) != 0) entry["explanation"] = g.below(5) == 0 ? nlohmann::json(42) : nlohmann::json("reason " + std::to_string(i));
    if (g.below(6) != 0) entry["sentences"] = g.below(7) == 0 ? nlohmann::json("0,1") : random_sentences(g, sentence_count);
    if (g.below(8) != 0) entry["label"] = g.below(10) == 0 ? nlohmann::json(3) : nlohmann::json(random_label(g, side));
    std::string key = g.below(10) == 0 ? "criterion " + std::to_string(i) : std::to_string(i);
    j[key] = g.below(15) == 0 ? nlohmann::json("included") : entry;
  }
  std::string text = j.dump(g.coin() ? -1 : 2);
  switch (g.below(7)) {
    case 0: text = "```json\n" + text + "\n```"; break;
    case 1: text = "Sure, here are the predictions:\n" + text + "\nLet me know."; break;
    case 2: text = text.substr(0, g.below(text.size() + 1)); break;
    case 3: text = "```\n" + text.substr(0, g.below(text.size() + 1)); break;
    case 4: text = g.coin() ? "I cannot determine this." : ""; break;
    default: break;
  }
  if (g.below(20) == 0) text = "[" + text + "]";
  return text;
}

/// Empty when the predictions satisfy every invariant, else a description.
inline std::string prediction_violations(const std::vector<trialmatch::matching::CriterionPrediction>& preds,
                                         std::size_t first, std::size_t expected,
                                         trialmatch::Side side, std::size_t sentence_count) {
  using namespace trialmatch::matching;
  if (preds.size() != expected) return "cardinality " + std::to_string(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    std::string at = " at " + std::to_string(i);
    if (p.criterion_index != first + i) return "index" + at;
    if (p.side != side) return "side" + at;
    if (!belongs_to(p.label, side)) return "label outside side set" + at;
    for (std::size_t k = 0; k < p.relevant_sentences.size(); ++k) {
      if (p.relevant_sentences[k] >= sentence_count) return "sentence out of range" + at;
      if (k > 0 && p.relevant_sentences[k - 1] >= p.relevant_sentences[k]) return "sentences unsorted" + at;
    }
    if (p.parse_status != ParseStatus::failed && p.explanation.empty()) return "empty explanation" + at;
    if (p.parse_status == ParseStatus::failed &&
        (p.label != EligibilityLabel::not_enough_information || !p.relevant_sentences.empty())) {
      return "failed fallback" + at;
    }
  }
  return {};
}

}  // namespace testing_support
