#include "trialmatch/llm/structured.hpp"

#include <string>

namespace trialmatch::llm {

namespace {

std::optional<nlohmann::json> try_object(std::string_view text) {
  auto j = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

std::string_view strip_fences(std::string_view text) {
  auto open = text.find("```");
  if (open == std::string_view::npos) return text;
  auto body_start = text.find('\n', open);
  if (body_start == std::string_view::npos) return text.substr(open + 3);
  ++body_start;
  auto close = text.find("```", body_start);
  return text.substr(body_start, close == std::string_view::npos ? std::string_view::npos
                                                                  : close - body_start);
}

}  // namespace

std::optional<ParsedObject> parse_json_object(std::string_view text) {
  if (auto j = try_object(text)) return ParsedObject{std::move(*j), false};

  auto body = strip_fences(text);
  auto first = body.find('{');
  auto last = body.rfind('}');
  if (first == std::string_view::npos || last == std::string_view::npos || last < first) {
    return std::nullopt;
  }
  if (auto j = try_object(body.substr(first, last - first + 1))) return ParsedObject{std::move(*j), true};
  return std::nullopt;
}

}  // namespace trialmatch::llm
