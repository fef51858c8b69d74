#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "trialmatch/error.hpp"

namespace trialmatch::llm {

struct ChatRequest {
  std::string model;
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;
  int max_output_tokens = 2048;
};

struct ChatResponse {
  std::string text;
  std::string backend_id;
  bool cached = false;
  double latency_ms = 0.0;
  int attempts = 0;       // backend attempts; 0 for cache hits
  bool refused = false;   // mock had no fixture for the request
};

/// System and user message pair produced by a prompt builder.
struct Prompt {
  std::string system;
  std::string user;

  bool operator==(const Prompt&) const = default;
};

struct BackendReply {
  std::string text;
  bool refused = false;
};

/// Retryable failure: rate limiting, 5xx, dropped connections.
class TransientError : public TransportError {
 public:
  using TransportError::TransportError;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  /// Throws TransientError for retryable failures, TransportError or
  /// ConfigError otherwise.
  virtual BackendReply send(const ChatRequest& request) = 0;
};

/// Hex SHA-256 over (model, system_text, user_text, temperature).
std::string request_key(const ChatRequest& request);

// Pipeline prompts open with a one-line routing header, e.g.
//   @request task=matching patient_id=p1 nct_id=NCT001 side=inclusion
// so fixtures can be keyed by structured fields rather than full text.
using RequestHeader = std::map<std::string, std::string>;

std::string format_request_header(const RequestHeader& fields);
/// Parses the header on the first line of `user_text`, if present.
std::optional<RequestHeader> parse_request_header(std::string_view user_text);

}  // namespace trialmatch::llm
