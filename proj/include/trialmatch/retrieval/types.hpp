#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace trialmatch::retrieval {

enum class Retriever { lexical, dense };

std::string_view to_string(Retriever r);

struct RankedTrial {
  std::string nct_id;
  double score = 0.0;

  bool operator==(const RankedTrial&) const = default;
};

/// One retriever's answer for one keyword. Rank of element `k` is `k + 1`.
struct KeywordRanking {
  Retriever retriever = Retriever::lexical;
  std::size_t keyword_index = 1;  // 1-based importance position
  std::vector<RankedTrial> ranked_trials;
};

/// Descending score, nct_id ascending on ties.
void sort_by_score(std::vector<RankedTrial>& trials);

}  // namespace trialmatch::retrieval
