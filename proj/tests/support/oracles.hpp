#pragma once

// Brute-force reference implementations. They follow the formulas term by
// term and share no code with the library, so agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// One (retriever, keyword) list: ids in rank order.
struct List {
  int retriever = 0;
  std::size_t keyword = 1;
  std::vector<std::string> ids;
};

/// Every (retriever, keyword, trial) triple evaluated explicitly, in
/// retriever-major then keyword order.
inline std::vector<std::pair<std::string, double>> fuse(const std::vector<List>& lists, double c,
                                                        std::size_t cutoff, std::size_t count) {
  std::set<std::string> universe;
  for (const auto& l : lists) universe.insert(l.ids.begin(), l.ids.end());
  std::vector<std::pair<std::string, double>> out;
  for (const auto& trial : universe) {
    double s = 0;
    bool seen = false;
    for (const auto& l : lists) {
      for (std::size_t pos = 0; pos < l.ids.size() && pos < cutoff; ++pos) {
        if (l.ids[pos] != trial) continue;
        s += 1.0 / (static_cast<double>(l.keyword) * (static_cast<double>(pos + 1) + c));
        seen = true;
      }
    }
    if (seen) out.emplace_back(trial, s);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (out.size() > count) out.resize(count);
  return out;
}

/// Okapi BM25 with idf = ln(1 + (N - df + 0.5) / (df + 0.5)).
inline double bm25(const std::vector<std::vector<std::string>>& docs, std::size_t doc,
                   const std::vector<std::string>& query, double k1, double b) {
  const double n = static_cast<double>(docs.size());
  double total = 0;
  for (const auto& d : docs) total += static_cast<double>(d.size());
  const double avgdl = total / n;
  double score = 0;
  for (const auto& term : query) {
    double df = 0;
    for (const auto& d : docs) df += std::count(d.begin(), d.end(), term) > 0 ? 1 : 0;
    if (df == 0) continue;
    double tf = static_cast<double>(std::count(docs[doc].begin(), docs[doc].end(), term));
    double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    double dl = static_cast<double>(docs[doc].size());
    score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
  }
  return score;
}

// Metrics over a run of ids and a map id -> grade (absent = unjudged).
using Grades = std::map<std::string, int>;

inline int grade_of(const Grades& g, const std::string& id) {
  auto it = g.find(id);
  return it == g.end() ? 0 : it->second;
}

inline double recall(const std::vector<std::string>& run, const Grades& g, std::size_t k) {
  double top = 0, all = 0;
  for (std::size_t i = 0; i < run.size() && i < k; ++i) top += grade_of(g, run[i]);
  for (const auto& [id, v] : g) all += v;
  return top / all;
}

inline double ndcg(const std::vector<std::string>& run, const Grades& g, std::size_t k) {
  double dcg = 0;
  for (std::size_t i = 0; i < run.size() && i < k; ++i) {
    dcg += grade_of(g, run[i]) / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> ideal;
  for (const auto& [id, v] : g) ideal.push_back(v);
  std::sort(ideal.rbegin(), ideal.rend());
  double idcg = 0;
  for (std::size_t i = 0; i < ideal.size() && i < k; ++i) {
    idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

inline double precision(const std::vector<std::string>& run, const Grades& g, std::size_t k) {
  double top = 0;
  for (std::size_t i = 0; i < run.size() && i < k; ++i) top += grade_of(g, run[i]);
  return top / (2.0 * static_cast<double>(k));
}

/// Enumerates every (positive, negative) pair.
inline double auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : p == n ? 0.5 : 0.0;
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace oracle
