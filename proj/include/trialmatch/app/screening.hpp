#pragma once

// Timed screening decisions from the pilot study workflow: two annotators,
// each screening half the pairs with model output on screen and half
// without.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trialmatch/error.hpp"

namespace trialmatch::app {

enum class Decision { no, maybe };

std::string_view to_string(Decision d) noexcept;
std::optional<Decision> decision_from_string(std::string_view text);

struct ScreeningDecision {
  std::string patient_id;
  std::string nct_id;
  Decision decision = Decision::no;
  bool assisted = false;
  std::int64_t elapsed_ms = 0;
  std::string annotator_id;
  std::string timestamp;  // ISO-8601 UTC

  bool operator==(const ScreeningDecision&) const = default;
};

/// Request body or log line failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DuplicateDecision : public Error {
 public:
  using Error::Error;
};

/// Validates and converts; a missing timestamp is filled with `now`.
ScreeningDecision decision_from_json(const nlohmann::json& j, std::string_view now = {});
nlohmann::json to_json(const ScreeningDecision& d);

std::string utc_timestamp_now();

/// Append-only JSONL log allowing one decision per (patient, trial,
/// annotator, assisted). Appends are serialized and flushed per line.
class DecisionLog {
 public:
  /// Loads any existing log at `path`; a missing file starts empty.
  explicit DecisionLog(std::filesystem::path path);

  /// Throws DuplicateDecision when the tuple is already logged.
  void append(const ScreeningDecision& d);

  std::vector<ScreeningDecision> decisions() const;
  std::size_t size() const;
  std::string export_csv() const;

 private:
  using Key = std::tuple<std::string, std::string, std::string, bool>;

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<ScreeningDecision> decisions_;
  std::set<Key> keys_;
};

std::string decisions_csv(const std::vector<ScreeningDecision>& decisions);

struct AssignmentItem {
  std::string patient_id;
  std::string nct_id;
  std::string assisted_annotator;
  std::string unassisted_annotator;

  bool operator==(const AssignmentItem&) const = default;
};

struct AnnotatorTask {
  std::string patient_id;
  std::string nct_id;
  bool assisted = false;
};

struct ScreeningAssignment {
  std::vector<std::string> annotators;
  std::vector<AssignmentItem> items;

  /// Empty when the annotator is not part of the assignment.
  std::vector<AnnotatorTask> tasks_for(std::string_view annotator) const;
  bool has_annotator(std::string_view annotator) const;

  bool operator==(const ScreeningAssignment&) const = default;
};

/// Shuffles the pairs with `seed`; the first annotator screens the first
/// half assisted and the second half unassisted, the other annotator the
/// reverse. Requires exactly two distinct annotators and an even count.
ScreeningAssignment build_screening_assignment(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::vector<std::string>& annotators, std::uint64_t seed);

nlohmann::json to_json(const ScreeningAssignment& a);
ScreeningAssignment assignment_from_json(const nlohmann::json& j);

struct GroupTiming {
  std::string key;
  double mean_assisted_ms = 0;
  double mean_unassisted_ms = 0;
  std::size_t n_assisted = 0;
  std::size_t n_unassisted = 0;
  double saving = 0;  // 1 - assisted / unassisted
};

struct ScreeningSummary {
  std::vector<GroupTiming> by_case;  // keyed by patient_id
  std::vector<GroupTiming> by_trial;
  std::vector<GroupTiming> by_annotator;
  std::optional<GroupTiming> overall;
  std::optional<double> accuracy_assisted;
  std::optional<double> accuracy_unassisted;
  std::vector<std::string> notes;  // omitted cells

  nlohmann::json to_json() const;
};

using AnswerKey = std::map<std::pair<std::string, std::string>, Decision>;

ScreeningSummary screening_summary(const std::vector<ScreeningDecision>& decisions,
                                   const AnswerKey* answer_key = nullptr);

}  // namespace trialmatch::app
