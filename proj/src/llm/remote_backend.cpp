#include "trialmatch/llm/remote_backend.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace trialmatch::llm {

RemoteConfig remote_config_from_env() {
  auto get = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') throw ConfigError(std::string(name) + " is not set");
    return v;
  };
  RemoteConfig c;
  c.endpoint = get("TRIALMATCH_LLM_ENDPOINT");
  c.model = get("TRIALMATCH_LLM_MODEL");
  c.api_key = get("TRIALMATCH_LLM_KEY");
  return c;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  if (config_.api_key.empty()) throw ConfigError("remote backend requires a credential");
  if (config_.model.empty()) throw ConfigError("remote backend requires a model name");
  const auto& url = config_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must be an http(s) URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

BackendReply RemoteBackend::send(const ChatRequest& request) {
  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_bearer_token_auth(config_.api_key);

  nlohmann::json body{
      {"model", request.model.empty() ? config_.model : request.model},
      {"temperature", request.temperature},
      {"max_tokens", request.max_output_tokens},
      {"messages",
       {{{"role", "system"}, {"content", request.system_text}},
        {{"role", "user"}, {"content", request.user_text}}}}};

  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) throw TransientError("request to " + origin_ + " failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransientError("backend returned HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("backend returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return {content.is_string() ? content.get<std::string>() : std::string(), false};
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unreadable chat-completion payload: ") + e.what());
  }
}

}  // namespace trialmatch::llm
