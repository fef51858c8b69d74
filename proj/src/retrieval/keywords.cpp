#include "trialmatch/retrieval/keywords.hpp"

#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trialmatch/llm/structured.hpp"
#include "util/strings.hpp"

namespace trialmatch::retrieval {

Prompt build_keyword_prompt(const corpus::PatientNote& note) {
  Prompt p;
  p.system =
      "You are a clinical research coordinator who searches clinical trial registries "
      "on behalf of patients.";
  std::ostringstream u;
  u << llm::format_request_header({{"task", "keywords"}, {"patient_id", note.patient_id}}) << "\n\n";
  u << "Patient note, one numbered sentence per line:\n";
  for (std::size_t i = 0; i < note.sentences.size(); ++i) u << i << ". " << note.sentences[i] << '\n';
  u << "\nList the medical conditions, findings and treatments in this note that are most useful "
       "as search keywords for finding clinical trials the patient could join. Rank the keywords "
       "by importance, most important first, and give at most "
    << kMaxKeywords << " keywords.\n";
  u << "Respond with only a JSON object of the form {\"keywords\": [\"keyword 1\", \"keyword 2\"]}.";
  p.user = u.str();
  return p;
}

std::vector<std::string> normalize_keywords(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& k : raw) {
    auto text = util::normalize_whitespace(k);
    if (text.empty()) continue;
    if (!seen.insert(util::to_lower(text)).second) continue;
    out.push_back(std::move(text));
    if (out.size() == kMaxKeywords) break;
  }
  return out;
}

std::vector<std::string> parse_keyword_response(const std::string& text) {
  auto parsed = llm::parse_json_object(text);
  if (!parsed) throw KeywordError("keyword response is not a JSON object", text);
  auto it = parsed->value.find("keywords");
  if (it == parsed->value.end() || !it->is_array()) {
    throw KeywordError("keyword response lacks a 'keywords' array", text);
  }
  std::vector<std::string> raw;
  for (const auto& k : *it) {
    if (k.is_string()) raw.push_back(k.get<std::string>());
  }
  auto keywords = normalize_keywords(raw);
  if (keywords.empty()) throw KeywordError("keyword response holds no keywords", text);
  return keywords;
}

KeywordQuery generate_keywords(const corpus::PatientNote& note, llm::Gateway& gateway) {
  auto prompt = build_keyword_prompt(note);
  auto response = gateway.complete(gateway.make_request(prompt.system, prompt.user));
  return {note.patient_id, parse_keyword_response(response.text)};
}

nlohmann::json to_json(const KeywordQuery& query) {
  return {{"patient_id", query.patient_id}, {"keywords", query.keywords}};
}

KeywordQuery keyword_query_from_json(const nlohmann::json& j) {
  return {j.at("patient_id").get<std::string>(), j.at("keywords").get<std::vector<std::string>>()};
}

}  // namespace trialmatch::retrieval
