#pragma once

#include "trialmatch/retrieval/dense_index.hpp"
#include "trialmatch/retrieval/fusion.hpp"
#include "trialmatch/retrieval/keywords.hpp"
#include "trialmatch/retrieval/lexical_index.hpp"

namespace trialmatch::retrieval {

/// Runs every keyword through BM25 and, when configured, the dense index,
/// then fuses. The dense side is optional: without an index or provider, or
/// when the provider fails for a keyword, that term is dropped and the
/// result is flagged `dense_skipped`.
class HybridRetriever {
 public:
  HybridRetriever(const LexicalIndex& lexical, const DenseIndex* dense,
                  const EmbeddingProvider* provider, FusionConfig config = {});

  RetrievalResult retrieve(const KeywordQuery& query) const;

  /// Per-(retriever, keyword) rankings feeding the fusion.
  std::vector<KeywordRanking> rankings(const KeywordQuery& query, bool* dense_skipped) const;

  const FusionConfig& config() const { return config_; }

 private:
  const LexicalIndex& lexical_;
  const DenseIndex* dense_;
  const EmbeddingProvider* provider_;
  FusionConfig config_;
};

}  // namespace trialmatch::retrieval
