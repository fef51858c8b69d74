#include "trialmatch/retrieval/retriever.hpp"

#include <spdlog/spdlog.h>

namespace trialmatch::retrieval {

HybridRetriever::HybridRetriever(const LexicalIndex& lexical, const DenseIndex* dense,
                                 const EmbeddingProvider* provider, FusionConfig config)
    : lexical_(lexical), dense_(dense), provider_(provider), config_(config) {
  config_.validate();
  if (dense_ != nullptr && provider_ != nullptr && dense_->dimension() != provider_->dimension()) {
    throw ConfigError("embedding provider dimension " + std::to_string(provider_->dimension()) +
                      " does not match dense index dimension " + std::to_string(dense_->dimension()));
  }
}

std::vector<KeywordRanking> HybridRetriever::rankings(const KeywordQuery& query,
                                                      bool* dense_skipped) const {
  std::vector<KeywordRanking> out;
  bool skipped = dense_ == nullptr || provider_ == nullptr;
  if (skipped) spdlog::warn("patient {}: dense retrieval unavailable, fusing lexical only", query.patient_id);
  for (std::size_t i = 0; i < query.keywords.size(); ++i) {
    const auto& kw = query.keywords[i];
    out.push_back(lexical_rank(kw, lexical_, config_.per_keyword_cutoff, i + 1));
    if (dense_ == nullptr || provider_ == nullptr) continue;
    try {
      out.push_back(dense_rank(kw, *dense_, *provider_, config_.per_keyword_cutoff, i + 1));
    } catch (const ProviderError& e) {
      spdlog::warn("patient {}: {}; dense term skipped", query.patient_id, e.what());
      skipped = true;
    }
  }
  if (dense_skipped != nullptr) *dense_skipped = skipped;
  return out;
}

RetrievalResult HybridRetriever::retrieve(const KeywordQuery& query) const {
  bool skipped = false;
  auto ranked = rankings(query, &skipped);
  auto result = fuse(ranked, config_, query.patient_id);
  result.dense_skipped = skipped;
  return result;
}

}  // namespace trialmatch::retrieval
