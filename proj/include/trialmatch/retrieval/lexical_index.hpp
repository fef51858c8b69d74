#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "trialmatch/corpus.hpp"
#include "trialmatch/retrieval/types.hpp"

namespace trialmatch::retrieval {

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

/// Lowercase alphanumeric runs. No stemming, no stopwords.
std::vector<std::string> tokenize(std::string_view text);

/// Title, conditions, interventions, summary and every criterion, in that order.
std::string trial_document_text(const corpus::TrialRecord& trial);

/// Okapi BM25 over an immutable inverted index.
///
/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which stays positive for
/// terms present in more than half the collection.
class LexicalIndex {
 public:
  struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
  };

  static LexicalIndex build(const std::vector<corpus::TrialRecord>& corpus, Bm25Params params = {});
  static LexicalIndex build(const std::vector<std::pair<std::string, std::string>>& documents,
                            Bm25Params params = {});

  std::size_t document_count() const { return doc_ids_.size(); }
  double average_length() const { return avg_length_; }
  std::uint32_t document_length(std::size_t doc) const { return doc_lengths_[doc]; }
  const std::string& document_id(std::size_t doc) const { return doc_ids_[doc]; }
  const Bm25Params& params() const { return params_; }
  std::size_t document_frequency(const std::string& term) const;

  double idf(std::size_t df) const;

  /// Scores every document containing at least one query token.
  std::vector<RankedTrial> score_all(std::string_view query) const;

  void save(std::ostream& out) const;
  static LexicalIndex load(std::istream& in);

 private:
  Bm25Params params_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_length_ = 0.0;
  std::map<std::string, std::vector<Posting>> postings_;
};

KeywordRanking lexical_rank(std::string_view keyword, const LexicalIndex& index,
                            std::size_t cutoff, std::size_t keyword_index = 1);

}  // namespace trialmatch::retrieval
