#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "trialmatch/llm/backend.hpp"

namespace trialmatch::llm {

/// One canned answer. Exactly one matcher kind is set:
///  - `user_text`: exact match on the full user message,
///  - `key`: match on request_key(),
///  - `fields`: every listed header field must equal the request's
///    routing header (see format_request_header).
struct MockFixture {
  std::string user_text;
  std::string key;
  RequestHeader fields;
  std::string response;
};

/// Deterministic fixture-replay backend. Lookup order: exact user text,
/// request key, then the header-field fixture with the most fields
/// (registration order breaks ties). Unmatched requests receive a
/// templated refusal with `refused` set.
class MockBackend final : public Backend {
 public:
  MockBackend() = default;

  std::string id() const override { return "mock"; }
  BackendReply send(const ChatRequest& request) override;

  void add(MockFixture fixture);
  /// Fixture JSONL: {"match": {...}, "response": "..."} per line. `match`
  /// holds "user_text", "key", or header fields. Returns fixtures added.
  std::size_t register_fixtures(const std::filesystem::path& path);
  std::size_t register_fixtures(std::istream& in);

  std::size_t fixture_count() const;

  static std::string refusal_text(const ChatRequest& request);

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> by_text_;
  std::unordered_map<std::string, std::string> by_key_;
  std::vector<MockFixture> by_fields_;
  std::size_t count_ = 0;
};

/// Serializes a fixture to the JSONL record accepted by register_fixtures.
std::string fixture_line(const MockFixture& fixture);

}  // namespace trialmatch::llm
