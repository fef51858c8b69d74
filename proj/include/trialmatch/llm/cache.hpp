#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

namespace trialmatch::llm {

/// Append-only JSONL response cache: {"key", "response", "ts"} per line.
/// Unreadable lines (e.g. a torn tail after a crash) are skipped on load.
/// Safe for concurrent use; writes are serialized.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path path);

  std::optional<std::string> find(const std::string& key) const;
  void store(const std::string& key, const std::string& response);

  std::size_t size() const;
  std::size_t skipped_lines() const { return skipped_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
  std::ofstream out_;
  std::size_t skipped_ = 0;
};

}  // namespace trialmatch::llm
