#pragma once

#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

namespace trialmatch::llm {

struct ParsedObject {
  nlohmann::json value;
  bool repaired = false;
};

/// Strict parse of a JSON object, then a single repair pass: strip
/// markdown code fences and retry on the outermost {...} span.
std::optional<ParsedObject> parse_json_object(std::string_view text);

}  // namespace trialmatch::llm
