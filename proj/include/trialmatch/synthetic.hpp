#pragma once

// Seeded synthetic cohorts with a hidden ground truth. Mock-backend
// fixtures are derived from that truth, optionally with label noise, so
// the full pipeline can be checked against a known answer.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "trialmatch/corpus.hpp"
#include "trialmatch/llm/mock_backend.hpp"
#include "trialmatch/retrieval/dense_index.hpp"

namespace trialmatch::synthetic {

struct SynthConfig {
  std::size_t patients = 10;
  std::size_t trials = 50;
  std::uint64_t seed = 7;
  /// Probability that a criterion label in the fixtures is replaced by a
  /// random label of the same side. 0 reproduces the truth.
  double label_noise = 0.0;
  /// Probability that a pair's aggregate scores are drawn from a random
  /// class's range instead of its true one.
  double aggregate_noise = 0.0;
  std::size_t embedding_dimension = 64;
};

enum class TruthClass { irrelevant, excluded, eligible };

struct SynthCohort {
  std::vector<corpus::TrialRecord> trials;
  std::vector<corpus::PatientNote> patients;
  std::vector<corpus::RelevanceJudgment> judgments;
  std::vector<llm::MockFixture> fixtures;
  retrieval::EmbeddingTable trial_embeddings;
  std::map<std::pair<std::string, std::string>, TruthClass> truth;
};

SynthCohort generate(const SynthConfig& config);

/// Writes trials.jsonl, patients.jsonl, qrels.txt, trial_embeddings.jsonl,
/// mock_responses.jsonl and a pipeline.toml pointing at them.
void write_cohort(const SynthCohort& cohort, const std::filesystem::path& dir,
                  std::uint64_t seed);

}  // namespace trialmatch::synthetic
