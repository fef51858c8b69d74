#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trialmatch/retrieval/types.hpp"

namespace trialmatch::retrieval {

struct FusionConfig {
  double rrf_constant = 20.0;
  std::size_t per_keyword_cutoff = 1000;
  std::size_t candidate_count = 500;

  /// Throws ConfigError for a non-positive constant.
  void validate() const;
};

struct RetrievalResult {
  std::string patient_id;
  std::vector<RankedTrial> scored;  // fused score, descending
  bool dense_skipped = false;

  bool operator==(const RetrievalResult&) const = default;
};

/// Keyword-decayed reciprocal rank fusion across retrievers:
///
///   s_j = sum over (retriever, keyword i) of 1 / (i * (rank + C))
///
/// A trial missing from a ranking, or ranked past `per_keyword_cutoff`,
/// contributes nothing to that term. Output is sorted by score descending
/// with nct_id ascending on ties and truncated to `candidate_count`.
RetrievalResult fuse(std::span<const KeywordRanking> rankings, const FusionConfig& config,
                     std::string patient_id = {});

nlohmann::json to_json(const RetrievalResult& result);
RetrievalResult retrieval_result_from_json(const nlohmann::json& j);

}  // namespace trialmatch::retrieval
