#include "trialmatch/retrieval/lexical_index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "trialmatch/error.hpp"

namespace trialmatch::retrieval {

namespace {
constexpr std::string_view kMagic = "trialmatch-lexical-index";
constexpr int kFormatVersion = 1;
}  // namespace

std::string_view to_string(Retriever r) { return r == Retriever::lexical ? "lexical" : "dense"; }

void sort_by_score(std::vector<RankedTrial>& trials) {
  std::sort(trials.begin(), trials.end(), [](const RankedTrial& a, const RankedTrial& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.nct_id < b.nct_id;
  });
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string trial_document_text(const corpus::TrialRecord& trial) {
  std::string text = trial.title;
  auto append = [&text](const std::string& s) {
    if (s.empty()) return;
    if (!text.empty()) text.push_back('\n');
    text += s;
  };
  for (const auto& c : trial.conditions) append(c);
  for (const auto& i : trial.interventions) append(i);
  append(trial.brief_summary);
  for (const auto& c : trial.inclusion_criteria) append(c.text);
  for (const auto& c : trial.exclusion_criteria) append(c.text);
  return text;
}

LexicalIndex LexicalIndex::build(const std::vector<corpus::TrialRecord>& corpus, Bm25Params params) {
  std::vector<std::pair<std::string, std::string>> docs;
  docs.reserve(corpus.size());
  for (const auto& t : corpus) docs.emplace_back(t.nct_id, trial_document_text(t));
  return build(docs, params);
}

LexicalIndex LexicalIndex::build(const std::vector<std::pair<std::string, std::string>>& documents,
                                 Bm25Params params) {
  if (documents.empty()) throw Error("cannot build a lexical index over an empty corpus");
  LexicalIndex index;
  index.params_ = params;
  std::uint64_t total = 0;
  for (const auto& [id, text] : documents) {
    auto doc = static_cast<std::uint32_t>(index.doc_ids_.size());
    auto tokens = tokenize(text);
    std::map<std::string, std::uint32_t> tf;
    for (auto& tok : tokens) ++tf[tok];
    for (auto& [term, count] : tf) index.postings_[term].push_back({doc, count});
    index.doc_ids_.push_back(id);
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total += tokens.size();
  }
  index.avg_length_ = static_cast<double>(total) / static_cast<double>(documents.size());
  return index;
}

std::size_t LexicalIndex::document_frequency(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

double LexicalIndex::idf(std::size_t df) const {
  auto n = static_cast<double>(doc_ids_.size());
  auto d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

std::vector<RankedTrial> LexicalIndex::score_all(std::string_view query) const {
  std::unordered_map<std::uint32_t, double> acc;
  for (const auto& term : tokenize(query)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(it->second.size());
    for (const auto& p : it->second) {
      double norm = avg_length_ > 0.0 ? doc_lengths_[p.doc] / avg_length_ : 1.0;
      double tf = p.tf;
      acc[p.doc] += w * tf * (params_.k1 + 1.0) /
                    (tf + params_.k1 * (1.0 - params_.b + params_.b * norm));
    }
  }
  std::vector<RankedTrial> out;
  out.reserve(acc.size());
  for (const auto& [doc, score] : acc) out.push_back({doc_ids_[doc], score});
  sort_by_score(out);
  return out;
}

void LexicalIndex::save(std::ostream& out) const {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "k1 " << params_.k1 << "\nb " << params_.b << '\n';
  out << "documents " << doc_ids_.size() << '\n';
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    out << std::quoted(doc_ids_[i]) << ' ' << doc_lengths_[i] << '\n';
  }
  out << "terms " << postings_.size() << '\n';
  for (const auto& [term, list] : postings_) {
    out << term << ' ' << list.size();
    for (const auto& p : list) out << ' ' << p.doc << ':' << p.tf;
    out << '\n';
  }
}

LexicalIndex LexicalIndex::load(std::istream& in) {
  auto expect = [&in](std::string_view word) {
    std::string got;
    if (!(in >> got) || got != word) {
      throw ParseError("lexical index: expected '" + std::string(word) + "', got '" + got + "'");
    }
  };
  expect(kMagic);
  int version = 0;
  if (!(in >> version) || version != kFormatVersion) {
    throw ParseError("lexical index: unsupported format version " + std::to_string(version));
  }
  LexicalIndex index;
  expect("k1");
  in >> index.params_.k1;
  expect("b");
  in >> index.params_.b;
  expect("documents");
  std::size_t n = 0;
  in >> n;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::string id;
    std::uint32_t len = 0;
    if (!(in >> std::quoted(id) >> len)) throw ParseError("lexical index: truncated document table");
    index.doc_ids_.push_back(std::move(id));
    index.doc_lengths_.push_back(len);
    total += len;
  }
  if (n == 0) throw ParseError("lexical index: no documents");
  index.avg_length_ = static_cast<double>(total) / static_cast<double>(n);
  expect("terms");
  std::size_t terms = 0;
  in >> terms;
  for (std::size_t t = 0; t < terms; ++t) {
    std::string term;
    std::size_t count = 0;
    if (!(in >> term >> count)) throw ParseError("lexical index: truncated postings");
    auto& list = index.postings_[term];
    list.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      Posting p;
      char colon = 0;
      if (!(in >> p.doc >> colon >> p.tf) || colon != ':' || p.doc >= n) {
        throw ParseError("lexical index: bad posting for term '" + term + "'");
      }
      list.push_back(p);
    }
  }
  return index;
}

KeywordRanking lexical_rank(std::string_view keyword, const LexicalIndex& index,
                            std::size_t cutoff, std::size_t keyword_index) {
  KeywordRanking r{Retriever::lexical, keyword_index, index.score_all(keyword)};
  if (r.ranked_trials.size() > cutoff) r.ranked_trials.resize(cutoff);
  return r;
}

}  // namespace trialmatch::retrieval
