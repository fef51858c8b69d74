#include "trialmatch/llm/mock_backend.hpp"

#include <nlohmann/json.hpp>

#include "util/jsonl.hpp"

namespace trialmatch::llm {

void MockBackend::add(MockFixture fixture) {
  std::lock_guard lock(mu_);
  ++count_;
  if (!fixture.user_text.empty()) {
    by_text_.emplace(fixture.user_text, std::move(fixture.response));
  } else if (!fixture.key.empty()) {
    by_key_.emplace(fixture.key, std::move(fixture.response));
  } else {
    by_fields_.push_back(std::move(fixture));
  }
}

std::size_t MockBackend::register_fixtures(std::istream& in) {
  std::size_t added = 0;
  util::for_each_jsonl(in, [&](const nlohmann::json& j, std::size_t line_no) {
    if (!j.is_object() || !j.contains("match") || !j.contains("response") ||
        !j["match"].is_object() || !j["response"].is_string()) {
      throw ParseError("fixture needs object 'match' and string 'response'", line_no);
    }
    MockFixture f;
    f.response = j["response"].get<std::string>();
    for (const auto& [k, v] : j["match"].items()) {
      if (!v.is_string()) throw ParseError("fixture match values must be strings", line_no);
      if (k == "user_text") {
        f.user_text = v.get<std::string>();
      } else if (k == "key") {
        f.key = v.get<std::string>();
      } else {
        f.fields[k] = v.get<std::string>();
      }
    }
    if (f.user_text.empty() && f.key.empty() && f.fields.empty()) {
      throw ParseError("fixture has an empty matcher", line_no);
    }
    add(std::move(f));
    ++added;
  });
  return added;
}

std::size_t MockBackend::register_fixtures(const std::filesystem::path& path) {
  auto in = util::open_input(path);
  return register_fixtures(in);
}

std::size_t MockBackend::fixture_count() const {
  std::lock_guard lock(mu_);
  return count_;
}

std::string MockBackend::refusal_text(const ChatRequest& request) {
  return "MOCK-REFUSAL: no fixture matches request " + request_key(request).substr(0, 16);
}

BackendReply MockBackend::send(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  if (auto it = by_text_.find(request.user_text); it != by_text_.end()) return {it->second, false};
  if (!by_key_.empty()) {
    if (auto it = by_key_.find(request_key(request)); it != by_key_.end()) return {it->second, false};
  }
  if (auto header = parse_request_header(request.user_text)) {
    const MockFixture* best = nullptr;
    for (const auto& f : by_fields_) {
      bool all = true;
      for (const auto& [k, v] : f.fields) {
        auto it = header->find(k);
        if (it == header->end() || it->second != v) {
          all = false;
          break;
        }
      }
      if (all && (best == nullptr || f.fields.size() > best->fields.size())) best = &f;
    }
    if (best != nullptr) return {best->response, false};
  }
  return {refusal_text(request), true};
}

std::string fixture_line(const MockFixture& fixture) {
  nlohmann::json match = nlohmann::json::object();
  if (!fixture.user_text.empty()) match["user_text"] = fixture.user_text;
  if (!fixture.key.empty()) match["key"] = fixture.key;
  for (const auto& [k, v] : fixture.fields) match[k] = v;
  return util::dump_line(nlohmann::json{{"match", match}, {"response", fixture.response}});
}

}  // namespace trialmatch::llm
