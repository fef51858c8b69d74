#pragma once

#include <chrono>
#include <string>

#include "trialmatch/llm/backend.hpp"

namespace trialmatch::llm {

struct RemoteConfig {
  std::string endpoint;  // full chat-completions URL
  std::string model;
  std::string api_key;
  std::chrono::seconds timeout{120};
};

/// Reads TRIALMATCH_LLM_ENDPOINT, TRIALMATCH_LLM_MODEL and TRIALMATCH_LLM_KEY.
/// Throws ConfigError when any is unset.
RemoteConfig remote_config_from_env();

/// OpenAI-compatible chat-completions client. HTTP 429/5xx and connection
/// failures surface as TransientError.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  std::string id() const override { return "remote:" + config_.model; }
  BackendReply send(const ChatRequest& request) override;

 private:
  RemoteConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
};

}  // namespace trialmatch::llm
