#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trialmatch/corpus.hpp"

namespace trialmatch::eval {

/// One patient's ranked trials, best first.
struct RankedRun {
  std::string patient_id;
  std::vector<std::pair<std::string, double>> entries;  // (nct_id, score)

  /// Sorts by score descending, nct_id ascending; throws on duplicate IDs.
  void normalize();
};

/// Judged trials for one patient. Trials absent from the map are unjudged.
using PatientJudgments = std::map<std::string, corpus::RelevanceLabel>;

std::map<std::string, PatientJudgments> group_judgments(
    const std::vector<corpus::RelevanceJudgment>& judgments);

/// Graded recall: sum of grades in the top k over the sum of all judged
/// grades. nullopt when the judged grades sum to 0.
std::optional<double> recall_at_k(const RankedRun& run, const PatientJudgments& judgments,
                                  std::size_t k);

/// nullopt when no judged trial has a positive grade.
std::optional<double> ndcg_at_k(const RankedRun& run, const PatientJudgments& judgments,
                                std::size_t k);

/// Sum of grades in the top k over (2 k); short runs keep k.
double precision_at_k(const RankedRun& run, const PatientJudgments& judgments, std::size_t k);

/// Mann-Whitney pair statistic with ties counted as half. nullopt unless
/// both classes are present.
std::optional<double> auroc(const std::vector<std::pair<double, bool>>& scored);

enum class Task { retrieval, ranking, excluding };

std::string_view to_string(Task task) noexcept;
Task task_from_string(std::string_view text);

struct EvalConfig {
  std::vector<std::size_t> recall_ks = {100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
  std::size_t ndcg_k = 10;
  std::size_t precision_k = 10;
  /// Ranking metrics see only judged trials from the run when set;
  /// otherwise unjudged trials stay in place with grade 0.
  bool judged_only = true;
  std::set<corpus::RelevanceLabel> auroc_positive = {corpus::RelevanceLabel::excluded};
  std::set<corpus::RelevanceLabel> auroc_negative = {corpus::RelevanceLabel::eligible};

  nlohmann::json to_json() const;
};

struct CohortReport {
  std::string name;
  std::vector<std::string> metrics;
  std::map<std::string, std::map<std::string, double>> per_patient;  // patient -> metric -> value
  std::map<std::string, double> means;
  std::map<std::string, double> pooled;  // excluding task: AUROC over all pairs
  std::vector<std::string> notes;        // skipped patients and cells
};

struct MetricReport {
  Task task = Task::ranking;
  EvalConfig config;
  std::vector<CohortReport> cohorts;
  std::map<std::string, double> macro;  // mean of cohort means

  nlohmann::json to_json() const;
  /// Aligned-column table.
  std::string to_text() const;
};

struct CohortRuns {
  std::string name;
  std::vector<corpus::RelevanceJudgment> judgments;
  std::vector<RankedRun> runs;
};

/// Throws when no run patient has judgments.
CohortReport evaluate_cohort(const CohortRuns& cohort, Task task, const EvalConfig& config = {});

MetricReport evaluate_cohorts(const std::vector<CohortRuns>& cohorts, Task task,
                              const EvalConfig& config = {});

/// "patient_id nct_id rank score tag" rows, runs in the given order.
void write_run_file(const std::filesystem::path& path, const std::vector<RankedRun>& runs,
                    std::string_view tag);
/// Groups rows by patient (first-appearance order) and orders by rank.
std::vector<RankedRun> read_run_file(const std::filesystem::path& path);

}  // namespace trialmatch::eval
