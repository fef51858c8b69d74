#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trialmatch/corpus.hpp"
#include "trialmatch/error.hpp"
#include "trialmatch/llm/gateway.hpp"

namespace trialmatch::retrieval {

inline constexpr std::size_t kMaxKeywords = 32;

struct KeywordQuery {
  std::string patient_id;
  std::vector<std::string> keywords;  // most important first

  bool operator==(const KeywordQuery&) const = default;
};

/// Keyword generation could not produce a usable list. Carries the raw reply.
class KeywordError : public Error {
 public:
  KeywordError(const std::string& what, std::string raw_response)
      : Error(what), raw_response_(std::move(raw_response)) {}
  const std::string& raw_response() const { return raw_response_; }

 private:
  std::string raw_response_;
};

using llm::Prompt;

Prompt build_keyword_prompt(const corpus::PatientNote& note);

/// Trims, drops empties, deduplicates case-insensitively keeping the first
/// spelling, truncates to kMaxKeywords.
std::vector<std::string> normalize_keywords(const std::vector<std::string>& raw);

/// Expects {"keywords": [...]}; throws KeywordError when unusable.
std::vector<std::string> parse_keyword_response(const std::string& text);

KeywordQuery generate_keywords(const corpus::PatientNote& note, llm::Gateway& gateway);

nlohmann::json to_json(const KeywordQuery& query);
KeywordQuery keyword_query_from_json(const nlohmann::json& j);

}  // namespace trialmatch::retrieval
