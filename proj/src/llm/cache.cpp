#include "trialmatch/llm/cache.hpp"

#include <chrono>
#include <ctime>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "trialmatch/error.hpp"
#include "util/jsonl.hpp"

namespace trialmatch::llm {

namespace {

std::string iso8601_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (util::trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        entries_[j.at("key").get<std::string>()] = j.at("response").get<std::string>();
      } catch (const std::exception&) {
        ++skipped_;
        spdlog::warn("response cache {}: skipping unreadable line {}", path_.string(), line_no);
      }
    }
  }
  bool torn_tail = false;
  if (std::filesystem::exists(path_) && std::filesystem::file_size(path_) > 0) {
    std::ifstream tail(path_, std::ios::binary);
    tail.seekg(-1, std::ios::end);
    torn_tail = tail.get() != '\n';
  }
  out_ = util::open_output(path_, std::ios::app);
  if (torn_tail) out_ << '\n';
}

std::optional<std::string> ResponseCache::find(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::store(const std::string& key, const std::string& response) {
  nlohmann::json j{{"key", key}, {"response", response}, {"ts", iso8601_now()}};
  auto line = util::dump_line(j) + '\n';
  std::lock_guard lock(mu_);
  if (!entries_.emplace(key, response).second) return;
  out_ << line;
  out_.flush();
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

}  // namespace trialmatch::llm
