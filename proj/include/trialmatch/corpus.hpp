#pragma once

// Trial corpora, patient notes and relevance judgments, plus the
// segmenters that turn raw criterion blocks and notes into indexed units.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace trialmatch {

enum class Side { inclusion, exclusion };

std::string_view to_string(Side side);
Side side_from_string(std::string_view text);

}  // namespace trialmatch

namespace trialmatch::corpus {

struct Criterion {
  std::size_t index = 0;
  Side side = Side::inclusion;
  std::string text;

  bool operator==(const Criterion&) const = default;
};

struct TrialRecord {
  std::string nct_id;
  std::string title;
  std::vector<std::string> conditions;
  std::vector<std::string> interventions;
  std::string brief_summary;
  std::vector<Criterion> inclusion_criteria;
  std::vector<Criterion> exclusion_criteria;

  const std::vector<Criterion>& criteria(Side side) const {
    return side == Side::inclusion ? inclusion_criteria : exclusion_criteria;
  }

  bool operator==(const TrialRecord&) const = default;
};

/// Builds a criterion list whose indices match list positions.
std::vector<Criterion> make_criteria(const std::vector<std::string>& texts, Side side);

struct PatientNote {
  std::string patient_id;
  std::string raw_text;
  std::vector<std::string> sentences;  // 0-indexed sentence IDs

  bool operator==(const PatientNote&) const = default;
};

PatientNote make_patient_note(std::string patient_id, std::string raw_text);

enum class RelevanceLabel { irrelevant, excluded, potential, eligible, unlabeled };

std::string_view to_string(RelevanceLabel label);
std::optional<RelevanceLabel> relevance_label_from_string(std::string_view text);

/// Graded relevance: irrelevant/unlabeled -> 0, excluded/potential -> 1,
/// eligible -> 2.
int grade(RelevanceLabel label) noexcept;

inline constexpr int kMaxGrade = 2;

struct RelevanceJudgment {
  std::string patient_id;
  std::string nct_id;
  RelevanceLabel label = RelevanceLabel::unlabeled;
  int grade = 0;

  bool operator==(const RelevanceJudgment&) const = default;
};

/// Maps qrels relevance tokens onto labels. Cohorts disagree on what the
/// middle grade means, so this is data rather than a hard-coded switch.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::map<std::string, RelevanceLabel> table);

  /// 0 irrelevant, 1 excluded, 2 eligible.
  static LabelVocabulary trec();
  /// 0 irrelevant, 1 potential, 2 eligible.
  static LabelVocabulary sigir();
  static LabelVocabulary named(std::string_view name);
  static LabelVocabulary from_json(const nlohmann::json& j);

  std::optional<RelevanceLabel> lookup(std::string_view token) const;
  const std::map<std::string, RelevanceLabel>& table() const { return table_; }

 private:
  std::map<std::string, RelevanceLabel> table_;
};

struct Cohort {
  std::string name;
  std::vector<PatientNote> patients;
  std::vector<RelevanceJudgment> judgments;
  std::filesystem::path trial_corpus_ref;

  /// Throws ParseError if a judgment references an unknown patient.
  void validate() const;
};

/// Splits a registry-style criterion block into trimmed criterion texts.
std::vector<std::string> segment_criteria(std::string_view raw_block);

/// Rule-based sentence splitter with an abbreviation stop-list.
std::vector<std::string> segment_sentences(std::string_view raw_text);

std::vector<TrialRecord> parse_trial_corpus(const std::filesystem::path& path);
std::vector<TrialRecord> parse_trial_corpus(std::istream& in);
TrialRecord trial_from_json(const nlohmann::json& j);
nlohmann::json trial_to_json(const TrialRecord& trial);
void write_trial_corpus(std::ostream& out, const std::vector<TrialRecord>& trials);

/// patients.jsonl: {"patient_id", "text"}; an optional "sentences" array is
/// taken verbatim instead of re-segmenting.
std::vector<PatientNote> parse_patients(const std::filesystem::path& path);
std::vector<PatientNote> parse_patients(std::istream& in);
nlohmann::json patient_to_json(const PatientNote& note);
void write_patients(std::ostream& out, const std::vector<PatientNote>& notes);

std::vector<RelevanceJudgment> load_qrels(const std::filesystem::path& path,
                                          const LabelVocabulary& vocab = LabelVocabulary::trec());
std::vector<RelevanceJudgment> load_qrels(std::istream& in,
                                          const LabelVocabulary& vocab = LabelVocabulary::trec());

}  // namespace trialmatch::corpus
