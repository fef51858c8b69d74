#include "trialmatch/llm/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

namespace trialmatch::llm {

RateLimiter::RateLimiter(double rate_per_second, double burst)
    : rate_(rate_per_second),
      capacity_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {
  if (!(rate_per_second > 0.0)) throw ConfigError("rate limit must be positive");
}

void RateLimiter::acquire() {
  for (;;) {
    std::chrono::duration<double> wait{0.0};
    {
      std::lock_guard lock(mu_);
      auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(capacity_,
                         tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    }
    std::this_thread::sleep_for(wait);
  }
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayConfig config)
    : backend_(std::move(backend)), config_(std::move(config)), rng_(config_.seed) {
  if (!backend_) throw ConfigError("gateway requires a backend");
  if (config_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  if (config_.max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
  if (config_.cache_path) cache_ = std::make_unique<ResponseCache>(*config_.cache_path);
  if (config_.requests_per_second > 0.0) limiter_.emplace(config_.requests_per_second, config_.burst);
}

ChatRequest Gateway::make_request(std::string system_text, std::string user_text) const {
  return {config_.model, std::move(system_text), std::move(user_text), 0.0, config_.max_output_tokens};
}

std::chrono::milliseconds Gateway::backoff_for(int attempt) {
  double base = static_cast<double>(config_.initial_backoff.count()) *
                std::pow(config_.backoff_multiplier, attempt - 1);
  base = std::min(base, static_cast<double>(config_.max_backoff.count()));
  double jitter;
  {
    std::lock_guard lock(rng_mu_);
    jitter = std::uniform_real_distribution<double>(0.5, 1.0)(rng_);
  }
  return std::chrono::milliseconds(static_cast<long long>(base * jitter));
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  if (request.temperature != 0.0) {
    throw ConfigError("pipeline requests must use temperature 0, got " +
                      std::to_string(request.temperature));
  }
  if (request.system_text.empty() || request.user_text.empty()) {
    throw ConfigError("chat request texts must be non-empty");
  }

  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&start] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  std::string key;
  if (cache_) {
    key = request_key(request);
    if (auto hit = cache_->find(key)) {
      ++cache_hits_;
      return {*hit, backend_->id(), true, elapsed_ms(), 0, false};
    }
  }

  {
    std::unique_lock lock(slots_mu_);
    slots_cv_.wait(lock, [this] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct SlotRelease {
    Gateway* g;
    ~SlotRelease() {
      {
        std::lock_guard lock(g->slots_mu_);
        --g->in_flight_;
      }
      g->slots_cv_.notify_one();
    }
  } release{this};

  for (int attempt = 1;; ++attempt) {
    if (limiter_) limiter_->acquire();
    ++backend_calls_;
    try {
      auto reply = backend_->send(request);
      // Refusals are not cached so that adding a fixture later takes effect.
      if (cache_ && !reply.refused) cache_->store(key, reply.text);
      return {std::move(reply.text), backend_->id(), false, elapsed_ms(), attempt, reply.refused};
    } catch (const TransientError& e) {
      if (attempt >= config_.max_attempts) {
        throw TransportError("giving up after " + std::to_string(attempt) + " attempts: " + e.what());
      }
      auto wait = backoff_for(attempt);
      spdlog::warn("transient backend failure (attempt {}/{}): {}; retrying in {} ms", attempt,
                   config_.max_attempts, e.what(), wait.count());
      std::this_thread::sleep_for(wait);
    }
  }
}

}  // namespace trialmatch::llm
