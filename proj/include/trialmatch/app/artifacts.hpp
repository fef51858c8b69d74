#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trialmatch/app/screening.hpp"
#include "trialmatch/corpus.hpp"
#include "trialmatch/matching/types.hpp"
#include "trialmatch/ranking/ranking.hpp"

namespace trialmatch::app {

/// Where each stage reads and writes inside --out-dir.
struct ArtifactLayout {
  std::filesystem::path root;

  std::filesystem::path trials() const { return root / "trials.jsonl"; }
  std::filesystem::path patients() const { return root / "patients.jsonl"; }
  std::filesystem::path qrels() const { return root / "qrels.txt"; }
  std::filesystem::path cohort() const { return root / "cohort.json"; }
  std::filesystem::path lexical_index() const { return root / "index" / "lexical.idx"; }
  std::filesystem::path trial_embeddings() const { return root / "index" / "trial_embeddings.jsonl"; }
  std::filesystem::path keywords() const { return root / "keywords.jsonl"; }
  std::filesystem::path retrieval() const { return root / "retrieval.jsonl"; }
  std::filesystem::path matches() const { return root / "matches.jsonl"; }
  std::filesystem::path match_summary() const { return root / "match_summary.json"; }
  std::filesystem::path scores() const { return root / "scores.jsonl"; }
  std::filesystem::path runs_dir() const { return root / "runs"; }
  std::filesystem::path retrieval_run() const { return runs_dir() / "retrieval.run"; }
  std::filesystem::path ranking_run(std::string_view feature) const {
    return runs_dir() / ("ranking_" + std::string(feature) + ".run");
  }
  std::filesystem::path excluding_run() const { return runs_dir() / "excluding.run"; }
  std::filesystem::path report_json() const { return root / "report.json"; }
  std::filesystem::path report_text() const { return root / "report.txt"; }
  std::filesystem::path assignment() const { return root / "assignment.json"; }
  std::filesystem::path decisions() const { return root / "decisions.jsonl"; }
};

/// An input a stage needs is absent. The CLI maps this to exit status 2.
class MissingInput : public Error {
 public:
  MissingInput(const std::filesystem::path& path, std::string_view hint)
      : Error("missing input " + path.string() + (hint.empty() ? "" : " (" + std::string(hint) + ")")),
        path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

void require_file(const std::filesystem::path& path, std::string_view hint = {});

/// cohort.json written at ingest time.
struct CohortInfo {
  std::string name;
  std::string label_vocabulary;
  std::size_t patients = 0;
  std::size_t trials = 0;
  std::size_t judgments = 0;
};

nlohmann::json to_json(const CohortInfo& info);
CohortInfo cohort_info_from_json(const nlohmann::json& j);

/// Read-only view of a finished pipeline directory, loaded once. Optional
/// artifacts (matches, scores, assignment) may be absent.
class ArtifactStore {
 public:
  explicit ArtifactStore(std::filesystem::path out_dir);

  const ArtifactLayout& layout() const { return layout_; }
  const CohortInfo& cohort() const { return cohort_; }

  const corpus::PatientNote* patient(const std::string& id) const;
  const corpus::TrialRecord* trial(const std::string& nct_id) const;
  const matching::TrialMatchResult* match(const std::string& pid, const std::string& nct) const;
  const ranking::TrialScore* score(const std::string& pid, const std::string& nct) const;
  /// Every score for one patient, in nct_id order.
  std::vector<ranking::TrialScore> scores_for(const std::string& pid) const;
  const std::optional<ScreeningAssignment>& assignment() const { return assignment_; }

  const std::vector<corpus::PatientNote>& patients() const { return patients_; }

 private:
  using PairKey = std::pair<std::string, std::string>;

  ArtifactLayout layout_;
  CohortInfo cohort_;
  std::vector<corpus::PatientNote> patients_;
  std::map<std::string, std::size_t> patient_index_;
  std::map<std::string, corpus::TrialRecord> trials_;
  std::map<PairKey, matching::TrialMatchResult> matches_;
  std::map<PairKey, ranking::TrialScore> scores_;
  std::optional<ScreeningAssignment> assignment_;
};

}  // namespace trialmatch::app
