#include "trialmatch/retrieval/dense_index.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"
#include "trialmatch/retrieval/lexical_index.hpp"
#include "util/jsonl.hpp"
#include "util/strings.hpp"

namespace trialmatch::retrieval {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

}  // namespace

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension == 0) throw ConfigError("hash embedding dimension must be positive");
}

std::vector<float> HashEmbeddingProvider::embed(std::string_view text) const {
  std::vector<double> acc(dimension_, 0.0);
  for (const auto& tok : tokenize(text)) {
    auto h = fnv1a(tok, seed_);
    acc[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
  }
  double n = 0.0;
  for (double x : acc) n += x * x;
  n = std::sqrt(n);
  std::vector<float> out(dimension_, 0.0f);
  if (n > 0.0) {
    for (std::size_t i = 0; i < dimension_; ++i) out[i] = static_cast<float>(acc[i] / n);
  }
  return out;
}

EmbeddingTable load_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::set<std::string> seen;
  bool header_allowed = true;
  util::for_each_jsonl(in, [&](const nlohmann::json& j, std::size_t line_no) {
    if (!j.is_object()) throw ParseError("embedding record must be an object", line_no);
    if (header_allowed && j.contains("dim") && !j.contains("vector")) {
      header_allowed = false;
      table.dimension = j.at("dim").get<std::size_t>();
      if (table.dimension == 0) throw ParseError("embedding dimension must be positive", line_no);
      return;
    }
    header_allowed = false;
    auto id = j.find("id");
    auto vec = j.find("vector");
    if (id == j.end() || !id->is_string() || vec == j.end() || !vec->is_array()) {
      throw ParseError("embedding record needs string 'id' and array 'vector'", line_no);
    }
    std::vector<float> v;
    v.reserve(vec->size());
    for (const auto& x : *vec) {
      if (!x.is_number()) throw ParseError("embedding vector must hold numbers", line_no);
      double d = x.get<double>();
      if (!std::isfinite(d)) throw ParseError("embedding vector must be finite", line_no);
      v.push_back(static_cast<float>(d));
    }
    if (table.dimension == 0) table.dimension = v.size();
    if (v.size() != table.dimension || v.empty()) {
      throw ParseError("embedding dimension " + std::to_string(v.size()) + " != " +
                           std::to_string(table.dimension),
                       line_no);
    }
    if (!seen.insert(id->get<std::string>()).second) {
      throw ParseError("duplicate embedding id '" + id->get<std::string>() + "'", line_no);
    }
    table.ids.push_back(id->get<std::string>());
    table.vectors.push_back(std::move(v));
  });
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  auto in = util::open_input(path);
  return load_embeddings(in);
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out << util::dump_line(nlohmann::json{{"dim", table.dimension}}) << '\n';
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    out << util::dump_line(nlohmann::json{{"id", table.ids[i]}, {"vector", table.vectors[i]}}) << '\n';
  }
}

FileEmbeddingProvider::FileEmbeddingProvider(const EmbeddingTable& table)
    : dimension_(table.dimension) {
  for (std::size_t i = 0; i < table.ids.size(); ++i) vectors_.emplace(table.ids[i], table.vectors[i]);
}

std::vector<float> FileEmbeddingProvider::embed(std::string_view text) const {
  if (auto it = vectors_.find(text); it != vectors_.end()) return it->second;
  auto key = util::to_lower(util::trim(text));
  if (auto it = vectors_.find(key); it != vectors_.end()) return it->second;
  throw ProviderError("no precomputed embedding for '" + std::string(text) + "'");
}

DenseIndex DenseIndex::build(const EmbeddingTable& table, Similarity similarity,
                             std::span<const std::string> corpus_ids) {
  DenseIndex index;
  index.similarity_ = similarity;
  index.dimension_ = table.dimension;
  std::set<std::string_view> keep(corpus_ids.begin(), corpus_ids.end());
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    if (!keep.empty() && !keep.contains(table.ids[i])) continue;
    const auto& v = table.vectors[i];
    if (v.size() != index.dimension_) throw Error("dense index: inconsistent vector dimension");
    index.ids_.push_back(table.ids[i]);
    index.data_.insert(index.data_.end(), v.begin(), v.end());
    index.norms_.push_back(norm_of(v));
  }
  return index;
}

std::vector<RankedTrial> DenseIndex::search(std::span<const float> query, std::size_t cutoff) const {
  if (query.size() != dimension_) {
    throw Error("dense query dimension " + std::to_string(query.size()) + " != index dimension " +
                std::to_string(dimension_));
  }
  const double qnorm = norm_of(query);
  std::vector<RankedTrial> out;
  out.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const float* row = data_.data() + i * dimension_;
    double dot = 0.0;
    for (std::size_t d = 0; d < dimension_; ++d) dot += static_cast<double>(row[d]) * query[d];
    if (similarity_ == Similarity::cosine) {
      double denom = qnorm * norms_[i];
      dot = denom > 0.0 ? dot / denom : 0.0;
    }
    out.push_back({ids_[i], dot});
  }
  sort_by_score(out);
  if (out.size() > cutoff) out.resize(cutoff);
  return out;
}

KeywordRanking dense_rank(std::string_view keyword, const DenseIndex& index,
                          const EmbeddingProvider& provider, std::size_t cutoff,
                          std::size_t keyword_index) {
  std::vector<float> q;
  try {
    q = provider.embed(keyword);
  } catch (const ProviderError& e) {
    throw ProviderError("embedding provider failed for keyword '" + std::string(keyword) +
                        "': " + e.what());
  }
  KeywordRanking r{Retriever::dense, keyword_index, {}};
  if (std::all_of(q.begin(), q.end(), [](float x) { return x == 0.0f; })) {
    if (q.size() != index.dimension()) throw Error("dense query dimension mismatch");
    return r;
  }
  r.ranked_trials = index.search(q, cutoff);
  return r;
}

}  // namespace trialmatch::retrieval
