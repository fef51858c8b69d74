#include "trialmatch/retrieval/fusion.hpp"

#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"

namespace trialmatch::retrieval {

void FusionConfig::validate() const {
  if (!(rrf_constant > 0.0) || !std::isfinite(rrf_constant)) {
    throw ConfigError("rrf_constant must be positive, got " + std::to_string(rrf_constant));
  }
}

RetrievalResult fuse(std::span<const KeywordRanking> rankings, const FusionConfig& config,
                     std::string patient_id) {
  config.validate();
  std::map<std::string, double> scores;
  for (const auto& ranking : rankings) {
    if (ranking.keyword_index == 0) throw Error("keyword indices are 1-based");
    const double decay = static_cast<double>(ranking.keyword_index);
    const std::size_t depth = std::min(ranking.ranked_trials.size(), config.per_keyword_cutoff);
    for (std::size_t pos = 0; pos < depth; ++pos) {
      const double rank = static_cast<double>(pos + 1);
      scores[ranking.ranked_trials[pos].nct_id] += 1.0 / (decay * (rank + config.rrf_constant));
    }
  }
  RetrievalResult result{std::move(patient_id), {}, false};
  result.scored.reserve(scores.size());
  for (auto& [id, s] : scores) result.scored.push_back({id, s});
  sort_by_score(result.scored);
  if (result.scored.size() > config.candidate_count) result.scored.resize(config.candidate_count);
  return result;
}

nlohmann::json to_json(const RetrievalResult& result) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& t : result.scored) candidates.push_back({{"nct_id", t.nct_id}, {"score", t.score}});
  return {{"patient_id", result.patient_id},
          {"dense_skipped", result.dense_skipped},
          {"candidates", std::move(candidates)}};
}

RetrievalResult retrieval_result_from_json(const nlohmann::json& j) {
  RetrievalResult r;
  r.patient_id = j.at("patient_id").get<std::string>();
  r.dense_skipped = j.value("dense_skipped", false);
  for (const auto& c : j.at("candidates")) {
    r.scored.push_back({c.at("nct_id").get<std::string>(), c.at("score").get<double>()});
  }
  return r;
}

}  // namespace trialmatch::retrieval
