#include <cctype>
#include <sstream>

#include "trialmatch/matching/matcher.hpp"

namespace trialmatch::matching {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out.empty() ? "(none listed)" : out;
}

std::string system_text(Side side) {
  return "You are a helpful assistant for clinical trial recruitment. Your task is to compare a "
         "patient note with the " +
         std::string(to_string(side)) +
         " criteria of a clinical trial and determine the patient's eligibility for each "
         "criterion.";
}

std::string label_guide(Side side) {
  if (side == Side::inclusion) {
    return "- \"included\": the patient meets the inclusion criterion.\n"
           "- \"not included\": the patient does not meet the inclusion criterion.\n"
           "- \"not enough information\": the note does not contain the information needed to "
           "decide.\n"
           "- \"not applicable\": the criterion does not apply to this patient.\n";
  }
  return "- \"excluded\": the patient meets the exclusion criterion and should be excluded.\n"
         "- \"not excluded\": the patient does not meet the exclusion criterion.\n"
         "- \"not enough information\": the note does not contain the information needed to "
         "decide.\n"
         "- \"not applicable\": the criterion does not apply to this patient.\n";
}

llm::Prompt render(const corpus::PatientNote& note, const corpus::TrialRecord& trial, Side side,
                   std::size_t first, std::size_t count, std::optional<std::size_t> chunk) {
  const auto& criteria = trial.criteria(side);
  const std::string side_name(to_string(side));

  llm::RequestHeader header{{"task", "matching"},
                            {"patient_id", note.patient_id},
                            {"nct_id", trial.nct_id},
                            {"side", side_name}};
  if (chunk) header["chunk"] = std::to_string(*chunk);

  std::ostringstream u;
  u << llm::format_request_header(header) << "\n\n";
  u << "Patient note, one numbered sentence per line (sentence IDs start at 0):\n";
  for (std::size_t i = 0; i < note.sentences.size(); ++i) u << i << ". " << note.sentences[i] << '\n';

  u << "\nClinical trial background:\n";
  u << "Title: " << trial.title << '\n';
  u << "Conditions: " << join(trial.conditions) << '\n';
  u << "Interventions: " << join(trial.interventions) << '\n';
  u << "Summary: " << trial.brief_summary << '\n';

  u << '\n' << static_cast<char>(std::toupper(side_name[0])) << side_name.substr(1)
    << " criteria (criterion IDs start at 0):\n";
  for (std::size_t i = first; i < first + count; ++i) u << i << ". " << criteria[i].text << '\n';

  u << "\nFor each " << side_name << " criterion, produce three elements in this order:\n"
    << "1. \"explanation\": a short explanation of how the patient relates to the criterion, "
       "grounded in the note.\n"
    << "2. \"sentences\": the IDs of the patient note sentences relevant to the criterion, or an "
       "empty list if there are none.\n"
    << "3. \"label\": the patient's eligibility for the criterion, exactly one of ";
  auto labels = labels_for(side);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    u << (i ? ", " : "") << '"' << display_name(labels[i]) << '"';
  }
  u << ".\n\nLabel definitions:\n" << label_guide(side);
  u << "\nRespond with only a JSON object mapping each criterion ID (as a string) to an object "
       "with the keys \"explanation\", \"sentences\" and \"label\", in that order, e.g. "
       "{\""
    << first << "\": {\"explanation\": \"...\", \"sentences\": [0], \"label\": \""
    << display_name(labels[0]) << "\"}}.";

  return {system_text(side), u.str()};
}

}  // namespace

std::size_t approximate_tokens(std::string_view text) noexcept { return (text.size() + 3) / 4; }

std::optional<llm::Prompt> build_matching_prompt(const corpus::PatientNote& note,
                                                 const corpus::TrialRecord& trial, Side side) {
  const auto n = trial.criteria(side).size();
  if (n == 0) return std::nullopt;
  return render(note, trial, side, 0, n, std::nullopt);
}

std::vector<PromptChunk> build_matching_prompts(const corpus::PatientNote& note,
                                                const corpus::TrialRecord& trial, Side side,
                                                const MatchingConfig& config) {
  const auto n = trial.criteria(side).size();
  if (n == 0) return {};
  auto whole = render(note, trial, side, 0, n, std::nullopt);
  if (approximate_tokens(whole.user) <= config.prompt_token_budget) return {{std::move(whole), 0, n}};

  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t first = 0;
  while (first < n) {
    std::size_t count = 1;
    while (first + count < n &&
           approximate_tokens(render(note, trial, side, first, count + 1, 0).user) <=
               config.prompt_token_budget) {
      ++count;
    }
    ranges.emplace_back(first, count);
    first += count;
  }
  std::vector<PromptChunk> chunks;
  for (std::size_t c = 0; c < ranges.size(); ++c) {
    auto [f, k] = ranges[c];
    chunks.push_back({render(note, trial, side, f, k, c), f, k});
  }
  return chunks;
}

}  // namespace trialmatch::matching
