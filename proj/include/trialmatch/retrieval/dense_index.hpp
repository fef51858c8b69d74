#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trialmatch/retrieval/types.hpp"

namespace trialmatch::retrieval {

/// Query-side encoder. Implementations throw ProviderError when a text
/// cannot be encoded.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<float> embed(std::string_view text) const = 0;
};

/// Signed feature hashing over the lexical tokenizer, L2-normalised.
/// Deterministic across runs and platforms; used for tests and fixtures.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dimension = 64, std::uint64_t seed = 0);

  std::size_t dimension() const override { return dimension_; }
  std::vector<float> embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

struct EmbeddingTable {
  std::size_t dimension = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<float>> vectors;
};

/// embeddings.jsonl: {"id", "vector"} per line, optionally preceded by a
/// {"dim": h} header line.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable load_embeddings(std::istream& in);
void write_embeddings(std::ostream& out, const EmbeddingTable& table);

/// Lookup of precomputed keyword vectors; exact text first, then the
/// lowercased trimmed form.
class FileEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(const EmbeddingTable& table);

  std::size_t dimension() const override { return dimension_; }
  std::vector<float> embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
  std::map<std::string, std::vector<float>, std::less<>> vectors_;
};

enum class Similarity { inner_product, cosine };

/// Exact-scan dense index over fixed-dimension trial vectors.
class DenseIndex {
 public:
  /// Keeps only vectors whose id is listed in `corpus_ids` when non-empty.
  static DenseIndex build(const EmbeddingTable& table, Similarity similarity = Similarity::inner_product,
                          std::span<const std::string> corpus_ids = {});

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  Similarity similarity() const { return similarity_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }

  std::vector<RankedTrial> search(std::span<const float> query, std::size_t cutoff) const;

 private:
  Similarity similarity_ = Similarity::inner_product;
  std::size_t dimension_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;  // row-major, size() x dimension()
  std::vector<double> norms_;
};

/// An all-zero query vector carries no signal and yields an empty ranking.
KeywordRanking dense_rank(std::string_view keyword, const DenseIndex& index,
                          const EmbeddingProvider& provider, std::size_t cutoff,
                          std::size_t keyword_index = 1);

}  // namespace trialmatch::retrieval
