#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trialmatch/corpus.hpp"
#include "trialmatch/llm/gateway.hpp"
#include "trialmatch/matching/types.hpp"
#include "trialmatch/retrieval/fusion.hpp"

namespace trialmatch::matching {

struct MatchingConfig {
  /// Approximate token budget (chars / 4) for one side's user message.
  /// Longer prompts are split into several calls over criterion chunks.
  std::size_t prompt_token_budget = 12'000;
  /// Re-send once, with a format reminder, when every prediction failed.
  bool reask_on_failure = false;
};

/// One call's worth of criteria: indices [first, first + count).
struct PromptChunk {
  llm::Prompt prompt;
  std::size_t first = 0;
  std::size_t count = 0;
};

std::size_t approximate_tokens(std::string_view text) noexcept;

/// Builds the single-call prompt for one side. Returns nullopt (skip) when
/// the side has no criteria.
std::optional<llm::Prompt> build_matching_prompt(const corpus::PatientNote& note,
                                                 const corpus::TrialRecord& trial, Side side);

/// Same prompt, split into chunks when it exceeds the token budget. Chunks
/// keep global criterion numbering. Empty when the side has no criteria.
std::vector<PromptChunk> build_matching_prompts(const corpus::PatientNote& note,
                                                const corpus::TrialRecord& trial, Side side,
                                                const MatchingConfig& config = {});

/// Parses {"<index>": {"explanation", "sentences", "label"}} for criteria
/// [0, expected). Never throws on content: anything unreadable becomes a
/// failed prediction.
std::vector<CriterionPrediction> parse_matching_response(const std::string& text,
                                                         std::size_t expected, Side side,
                                                         std::size_t sentence_count);

/// Chunked variant for criteria [first, first + count).
std::vector<CriterionPrediction> parse_matching_response(const std::string& text,
                                                         std::size_t first, std::size_t count,
                                                         Side side, std::size_t sentence_count);

/// Criterion-level predictions for one pair: one call per non-empty side
/// (more only when a side is chunked). Transport errors are re-thrown
/// tagged with (patient_id, nct_id, side).
TrialMatchResult match_pair(const corpus::PatientNote& note, const corpus::TrialRecord& trial,
                            llm::Gateway& gateway, const MatchingConfig& config = {});

struct MatchFailure {
  std::string patient_id;
  std::string nct_id;
  std::string error;
};

struct MatchRunSummary {
  std::size_t total_pairs = 0;
  std::size_t already_present = 0;
  std::size_t matched = 0;
  std::vector<MatchFailure> failures;
};

struct MatchCohortOptions {
  std::size_t parallelism = 4;
  std::size_t max_candidates = 0;  // per patient; 0 keeps all
  MatchingConfig matching;
};

/// Matches every (patient, retrieved candidate) pair into `output`
/// (matches.jsonl). Pairs already in the file are skipped, completed pairs
/// are appended as they finish, and the file is rewritten sorted by
/// (patient_id, nct_id) at the end.
MatchRunSummary match_cohort(const std::vector<corpus::PatientNote>& patients,
                             const std::vector<corpus::TrialRecord>& trials,
                             const std::vector<retrieval::RetrievalResult>& retrieval,
                             llm::Gateway& gateway, const std::filesystem::path& output,
                             const MatchCohortOptions& options = {});

std::vector<TrialMatchResult> load_matches(const std::filesystem::path& path);

}  // namespace trialmatch::matching
