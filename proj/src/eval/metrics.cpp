#include "trialmatch/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "trialmatch/error.hpp"
#include "util/jsonl.hpp"
#include "util/strings.hpp"

namespace trialmatch::eval {

using corpus::RelevanceLabel;
using nlohmann::json;

void RankedRun::normalize() {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].first == entries[i - 1].first) {
      throw Error("run for " + patient_id + " lists " + entries[i].first + " twice");
    }
  }
}

std::map<std::string, PatientJudgments> group_judgments(
    const std::vector<corpus::RelevanceJudgment>& judgments) {
  std::map<std::string, PatientJudgments> out;
  for (const auto& j : judgments) out[j.patient_id][j.nct_id] = j.label;
  return out;
}

namespace {

int grade_of(const PatientJudgments& judgments, const std::string& nct_id) {
  auto it = judgments.find(nct_id);
  return it == judgments.end() ? 0 : corpus::grade(it->second);
}

bool is_judged(const PatientJudgments& judgments, const std::string& nct_id) {
  auto it = judgments.find(nct_id);
  return it != judgments.end() && it->second != RelevanceLabel::unlabeled;
}

}  // namespace

std::optional<double> recall_at_k(const RankedRun& run, const PatientJudgments& judgments,
                                  std::size_t k) {
  double total = 0;
  for (const auto& [id, label] : judgments) total += corpus::grade(label);
  if (total <= 0) return std::nullopt;
  double hit = 0;
  for (std::size_t i = 0; i < std::min(k, run.entries.size()); ++i) {
    hit += grade_of(judgments, run.entries[i].first);
  }
  return hit / total;
}

std::optional<double> ndcg_at_k(const RankedRun& run, const PatientJudgments& judgments,
                                std::size_t k) {
  std::vector<int> ideal;
  for (const auto& [id, label] : judgments) ideal.push_back(corpus::grade(label));
  std::sort(ideal.rbegin(), ideal.rend());
  double idcg = 0;
  for (std::size_t pos = 1; pos <= std::min(k, ideal.size()); ++pos) {
    idcg += ideal[pos - 1] / std::log2(static_cast<double>(pos) + 1);
  }
  if (idcg <= 0) return std::nullopt;
  double dcg = 0;
  for (std::size_t pos = 1; pos <= std::min(k, run.entries.size()); ++pos) {
    dcg += grade_of(judgments, run.entries[pos - 1].first) / std::log2(static_cast<double>(pos) + 1);
  }
  return dcg / idcg;
}

double precision_at_k(const RankedRun& run, const PatientJudgments& judgments, std::size_t k) {
  if (k == 0) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < std::min(k, run.entries.size()); ++i) {
    sum += grade_of(judgments, run.entries[i].first);
  }
  return sum / (static_cast<double>(corpus::kMaxGrade) * static_cast<double>(k));
}

std::optional<double> auroc(const std::vector<std::pair<double, bool>>& scored) {
  // Rank-sum form of the pair count: sort once, give tied groups their
  // average rank.
  std::vector<std::pair<double, bool>> v(scored);
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) ++j;
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (v[t].second) {
        ++pos;
        rank_sum += avg_rank;
      } else {
        ++neg;
      }
    }
    i = j;
  }
  if (pos == 0 || neg == 0) return std::nullopt;
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

std::string_view to_string(Task task) noexcept {
  switch (task) {
    case Task::retrieval: return "retrieval";
    case Task::ranking: return "ranking";
    case Task::excluding: return "excluding";
  }
  return "ranking";
}

Task task_from_string(std::string_view text) {
  if (text == "retrieval") return Task::retrieval;
  if (text == "ranking") return Task::ranking;
  if (text == "excluding") return Task::excluding;
  throw ConfigError("unknown evaluation task '" + std::string(text) + "'");
}

json EvalConfig::to_json() const {
  auto labels = [](const std::set<RelevanceLabel>& s) {
    auto arr = json::array();
    for (auto l : s) arr.push_back(corpus::to_string(l));
    return arr;
  };
  return {{"recall_ks", recall_ks},
          {"ndcg_k", ndcg_k},
          {"precision_k", precision_k},
          {"judged_only", judged_only},
          {"auroc_positive", labels(auroc_positive)},
          {"auroc_negative", labels(auroc_negative)}};
}

namespace {

RankedRun judged_subset(const RankedRun& run, const PatientJudgments& judgments) {
  RankedRun out{run.patient_id, {}};
  for (const auto& e : run.entries) {
    if (is_judged(judgments, e.first)) out.entries.push_back(e);
  }
  return out;
}

std::vector<std::string> metric_names(Task task, const EvalConfig& config) {
  switch (task) {
    case Task::retrieval: {
      std::vector<std::string> names;
      for (auto k : config.recall_ks) names.push_back(fmt::format("recall@{}", k));
      return names;
    }
    case Task::ranking:
      return {fmt::format("ndcg@{}", config.ndcg_k), fmt::format("p@{}", config.precision_k)};
    case Task::excluding: return {"auroc"};
  }
  return {};
}

}  // namespace

CohortReport evaluate_cohort(const CohortRuns& cohort, Task task, const EvalConfig& config) {
  CohortReport report;
  report.name = cohort.name;
  report.metrics = metric_names(task, config);
  auto judged = group_judgments(cohort.judgments);

  std::vector<std::pair<double, bool>> pooled;
  std::size_t overlap = 0;
  auto note = [&](std::string text) {
    spdlog::warn("{}: {}", cohort.name, text);
    report.notes.push_back(std::move(text));
  };

  std::unordered_set<std::string> seen;
  for (const auto& run : cohort.runs) {
    seen.insert(run.patient_id);
    auto jit = judged.find(run.patient_id);
    if (jit == judged.end()) {
      note("patient " + run.patient_id + " has no judgments; skipped");
      continue;
    }
    ++overlap;
    const auto& pj = jit->second;
    auto& row = report.per_patient[run.patient_id];

    switch (task) {
      case Task::retrieval:
        for (std::size_t i = 0; i < config.recall_ks.size(); ++i) {
          auto r = recall_at_k(run, pj, config.recall_ks[i]);
          if (!r) {
            note("patient " + run.patient_id + ": judged grades sum to 0; recall undefined");
            break;
          }
          row[report.metrics[i]] = *r;
        }
        break;
      case Task::ranking: {
        auto view = config.judged_only ? judged_subset(run, pj) : run;
        auto n = ndcg_at_k(view, pj, config.ndcg_k);
        if (!n) {
          note("patient " + run.patient_id + ": no positively graded trial; ndcg undefined");
          break;
        }
        row[report.metrics[0]] = *n;
        row[report.metrics[1]] = precision_at_k(view, pj, config.precision_k);
        break;
      }
      case Task::excluding: {
        std::vector<std::pair<double, bool>> scored;
        for (const auto& [id, score] : run.entries) {
          auto it = pj.find(id);
          if (it == pj.end()) continue;
          if (config.auroc_positive.contains(it->second)) scored.emplace_back(score, true);
          if (config.auroc_negative.contains(it->second)) scored.emplace_back(score, false);
        }
        pooled.insert(pooled.end(), scored.begin(), scored.end());
        auto a = auroc(scored);
        if (!a) {
          note("patient " + run.patient_id + ": single-class pairs; auroc undefined");
          break;
        }
        row["auroc"] = *a;
        break;
      }
    }
    if (row.empty()) report.per_patient.erase(run.patient_id);
  }
  if (overlap == 0) {
    throw Error("cohort " + cohort.name + ": no run patient has relevance judgments");
  }
  for (const auto& [pid, _] : judged) {
    if (!seen.contains(pid)) note("patient " + pid + " has judgments but no run");
  }

  for (const auto& m : report.metrics) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& [pid, row] : report.per_patient) {
      if (auto it = row.find(m); it != row.end()) {
        sum += it->second;
        ++n;
      }
    }
    if (n > 0) {
      report.means[m] = sum / static_cast<double>(n);
    } else {
      note("metric " + m + " undefined for every patient");
    }
  }
  if (task == Task::excluding) {
    if (auto a = auroc(pooled)) report.pooled["auroc"] = *a;
  }
  return report;
}

MetricReport evaluate_cohorts(const std::vector<CohortRuns>& cohorts, Task task,
                              const EvalConfig& config) {
  MetricReport report;
  report.task = task;
  report.config = config;
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& c : cohorts) {
    report.cohorts.push_back(evaluate_cohort(c, task, config));
    for (const auto& [m, v] : report.cohorts.back().means) {
      acc[m].first += v;
      ++acc[m].second;
    }
  }
  for (const auto& [m, sn] : acc) report.macro[m] = sn.first / static_cast<double>(sn.second);
  return report;
}

json MetricReport::to_json() const {
  json j;
  j["task"] = to_string(task);
  j["config"] = config.to_json();
  j["cohorts"] = json::array();
  for (const auto& c : cohorts) {
    json cj;
    cj["name"] = c.name;
    cj["metrics"] = c.metrics;
    cj["per_patient"] = c.per_patient;
    cj["mean"] = c.means;
    if (!c.pooled.empty()) cj["pooled"] = c.pooled;
    cj["notes"] = c.notes;
    j["cohorts"].push_back(std::move(cj));
  }
  j["macro_mean"] = macro;
  return j;
}

std::string MetricReport::to_text() const {
  std::ostringstream out;
  for (const auto& c : cohorts) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"patient_id"};
    header.insert(header.end(), c.metrics.begin(), c.metrics.end());
    rows.push_back(header);
    auto row_for = [&](const std::string& label, const std::map<std::string, double>& values) {
      std::vector<std::string> r{label};
      for (const auto& m : c.metrics) {
        auto it = values.find(m);
        r.push_back(it == values.end() ? "-" : fmt::format("{:.4f}", it->second));
      }
      rows.push_back(std::move(r));
    };
    for (const auto& [pid, values] : c.per_patient) row_for(pid, values);
    row_for("mean", c.means);
    if (!c.pooled.empty()) row_for("pooled", c.pooled);

    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    out << "cohort " << c.name << " (" << to_string(task) << ")\n";
    for (const auto& r : rows) {
      std::string line;
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i == 0) {
          line += fmt::format("{:<{}}", r[i], width[i]);
        } else {
          line += fmt::format("  {:>{}}", r[i], width[i]);
        }
      }
      out << line << '\n';
    }
    for (const auto& n : c.notes) out << "note: " << n << '\n';
    out << '\n';
  }
  if (cohorts.size() > 1) {
    out << "macro mean";
    for (const auto& [m, v] : macro) out << fmt::format("  {}={:.4f}", m, v);
    out << '\n';
  }
  return out.str();
}

void write_run_file(const std::filesystem::path& path, const std::vector<RankedRun>& runs,
                    std::string_view tag) {
  auto out = util::open_output(path);
  for (const auto& run : runs) {
    for (std::size_t i = 0; i < run.entries.size(); ++i) {
      out << fmt::format("{} {} {} {} {}\n", run.patient_id, run.entries[i].first, i + 1,
                         run.entries[i].second, tag);
    }
  }
}

std::vector<RankedRun> read_run_file(const std::filesystem::path& path) {
  auto in = util::open_input(path);
  std::vector<RankedRun> runs;
  std::map<std::string, std::size_t> slot;
  std::map<std::string, std::vector<std::pair<std::size_t, std::pair<std::string, double>>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto f = util::split_whitespace(line);
    if (f.empty()) continue;
    if (f.size() != 5) throw ParseError("run row needs 5 columns, got " + std::to_string(f.size()), line_no);
    std::size_t rank;
    double score;
    try {
      rank = std::stoul(std::string(f[2]));
      score = std::stod(std::string(f[3]));
    } catch (const std::exception&) {
      throw ParseError("bad rank or score in run row", line_no);
    }
    std::string pid(f[0]);
    if (!slot.contains(pid)) {
      slot[pid] = runs.size();
      runs.push_back({pid, {}});
    }
    rows[pid].push_back({rank, {std::string(f[1]), score}});
  }
  for (auto& run : runs) {
    auto& r = rows[run.patient_id];
    std::stable_sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [rank, e] : r) run.entries.push_back(std::move(e));
  }
  return runs;
}

}  // namespace trialmatch::eval
