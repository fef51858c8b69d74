#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include "trialmatch/llm/backend.hpp"
#include "trialmatch/llm/cache.hpp"

namespace trialmatch::llm {

struct GatewayConfig {
  std::string model = "gpt-4-0613";
  int max_output_tokens = 2048;
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30'000};
  std::size_t max_in_flight = 8;
  double requests_per_second = 0.0;  // 0 disables the token bucket
  double burst = 1.0;
  std::uint64_t seed = 0;            // backoff jitter
  std::optional<std::filesystem::path> cache_path;
};

/// Token bucket; acquire() blocks until a token is available.
class RateLimiter {
 public:
  RateLimiter(double rate_per_second, double burst);
  void acquire();

 private:
  std::mutex mu_;
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

/// Chat-completion front door shared by every pipeline stage: response
/// cache, gateway-wide in-flight bound, rate limiting and jittered
/// exponential backoff on transient failures. Safe to call concurrently.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, GatewayConfig config = {});

  /// Rejects any request with temperature != 0 or empty texts.
  ChatResponse complete(const ChatRequest& request);

  /// Fills model, temperature and token limit from the config.
  ChatRequest make_request(std::string system_text, std::string user_text) const;

  const GatewayConfig& config() const { return config_; }
  std::size_t backend_calls() const { return backend_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  std::chrono::milliseconds backoff_for(int attempt);

  std::shared_ptr<Backend> backend_;
  GatewayConfig config_;
  std::unique_ptr<ResponseCache> cache_;
  std::optional<RateLimiter> limiter_;

  std::mutex slots_mu_;
  std::condition_variable slots_cv_;
  std::size_t in_flight_ = 0;

  std::mutex rng_mu_;
  std::mt19937_64 rng_;

  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace trialmatch::llm
