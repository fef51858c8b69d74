#include "trialmatch/app/artifacts.hpp"

#include <nlohmann/json.hpp>

#include "trialmatch/matching/matcher.hpp"
#include "util/jsonl.hpp"

namespace trialmatch::app {

using nlohmann::json;

void require_file(const std::filesystem::path& path, std::string_view hint) {
  if (!std::filesystem::is_regular_file(path)) throw MissingInput(path, hint);
}

json to_json(const CohortInfo& info) {
  return {{"name", info.name},
          {"label_vocabulary", info.label_vocabulary},
          {"patients", info.patients},
          {"trials", info.trials},
          {"judgments", info.judgments}};
}

CohortInfo cohort_info_from_json(const json& j) {
  CohortInfo c;
  c.name = j.at("name").get<std::string>();
  c.label_vocabulary = j.value("label_vocabulary", "trec");
  c.patients = j.value("patients", std::size_t{0});
  c.trials = j.value("trials", std::size_t{0});
  c.judgments = j.value("judgments", std::size_t{0});
  return c;
}

ArtifactStore::ArtifactStore(std::filesystem::path out_dir) : layout_{std::move(out_dir)} {
  require_file(layout_.cohort(), "run `trialmatch ingest` first");
  require_file(layout_.patients(), "run `trialmatch ingest` first");
  require_file(layout_.trials(), "run `trialmatch ingest` first");
  {
    auto in = util::open_input(layout_.cohort());
    cohort_ = cohort_info_from_json(json::parse(in));
  }
  patients_ = corpus::parse_patients(layout_.patients());
  for (std::size_t i = 0; i < patients_.size(); ++i) patient_index_[patients_[i].patient_id] = i;
  for (auto& t : corpus::parse_trial_corpus(layout_.trials())) {
    auto id = t.nct_id;
    trials_.emplace(std::move(id), std::move(t));
  }
  if (std::filesystem::exists(layout_.matches())) {
    for (auto& m : matching::load_matches(layout_.matches())) {
      PairKey key{m.patient_id, m.nct_id};
      matches_.emplace(std::move(key), std::move(m));
    }
  }
  if (std::filesystem::exists(layout_.scores())) {
    for (auto& s : ranking::load_scores(layout_.scores())) {
      PairKey key{s.patient_id, s.nct_id};
      scores_.emplace(std::move(key), std::move(s));
    }
  }
  if (std::filesystem::exists(layout_.assignment())) {
    auto in = util::open_input(layout_.assignment());
    assignment_ = assignment_from_json(json::parse(in));
  }
}

const corpus::PatientNote* ArtifactStore::patient(const std::string& id) const {
  auto it = patient_index_.find(id);
  return it == patient_index_.end() ? nullptr : &patients_[it->second];
}

const corpus::TrialRecord* ArtifactStore::trial(const std::string& nct_id) const {
  auto it = trials_.find(nct_id);
  return it == trials_.end() ? nullptr : &it->second;
}

const matching::TrialMatchResult* ArtifactStore::match(const std::string& pid,
                                                       const std::string& nct) const {
  auto it = matches_.find({pid, nct});
  return it == matches_.end() ? nullptr : &it->second;
}

const ranking::TrialScore* ArtifactStore::score(const std::string& pid, const std::string& nct) const {
  auto it = scores_.find({pid, nct});
  return it == scores_.end() ? nullptr : &it->second;
}

std::vector<ranking::TrialScore> ArtifactStore::scores_for(const std::string& pid) const {
  std::vector<ranking::TrialScore> out;
  for (auto it = scores_.lower_bound({pid, ""}); it != scores_.end() && it->first.first == pid; ++it) {
    out.push_back(it->second);
  }
  return out;
}

}  // namespace trialmatch::app
