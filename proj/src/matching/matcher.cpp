#include "trialmatch/matching/matcher.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "trialmatch/llm/structured.hpp"
#include "util/jsonl.hpp"
#include "util/strings.hpp"

namespace trialmatch::matching {

using nlohmann::json;

namespace {

constexpr std::string_view kMissingExplanation = "(no explanation given)";

// Reads one sentence ID; nullopt when the value is not a non-negative integer.
std::optional<std::size_t> sentence_id(const json& v) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer()) {
    auto i = v.get<std::int64_t>();
    return i < 0 ? std::nullopt : std::optional<std::size_t>(static_cast<std::size_t>(i));
  }
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (!std::isfinite(d) || d < 0 || d != std::floor(d) || d > 1e9) return std::nullopt;
    return static_cast<std::size_t>(d);
  }
  if (v.is_string()) {
    auto s = util::trim(v.get_ref<const std::string&>());
    if (s.empty() || s.size() > 9 || !std::all_of(s.begin(), s.end(), ::isdigit)) return std::nullopt;
    return static_cast<std::size_t>(std::stoul(std::string(s)));
  }
  return std::nullopt;
}

CriterionPrediction parse_entry(const json* entry, std::size_t index, Side side,
                                std::size_t sentence_count, bool repaired) {
  if (entry == nullptr || !entry->is_object()) return failed_prediction(index, side);

  auto label_it = entry->find("label");
  if (label_it == entry->end() || !label_it->is_string()) return failed_prediction(index, side);
  auto label = parse_label(label_it->get<std::string>(), side);
  if (!label) return failed_prediction(index, side);

  CriterionPrediction p;
  p.criterion_index = index;
  p.side = side;
  p.label = *label;

  auto expl = entry->find("explanation");
  if (expl != entry->end() && expl->is_string() && !util::trim(expl->get<std::string>()).empty()) {
    p.explanation = expl->get<std::string>();
  } else {
    p.explanation = kMissingExplanation;
    repaired = true;
  }

  auto sents = entry->find("sentences");
  std::vector<const json*> items;
  if (sents == entry->end() || sents->is_null()) {
    repaired = true;
  } else if (sents->is_array()) {
    for (const auto& v : *sents) items.push_back(&v);
  } else {
    items.push_back(&*sents);
    repaired = true;
  }
  for (const json* v : items) {
    auto id = sentence_id(*v);
    if (id && *id < sentence_count) {
      p.relevant_sentences.push_back(*id);
    } else {
      repaired = true;
    }
  }
  std::sort(p.relevant_sentences.begin(), p.relevant_sentences.end());
  p.relevant_sentences.erase(std::unique(p.relevant_sentences.begin(), p.relevant_sentences.end()),
                             p.relevant_sentences.end());

  p.parse_status = repaired ? ParseStatus::repaired : ParseStatus::ok;
  return p;
}

}  // namespace

std::vector<CriterionPrediction> parse_matching_response(const std::string& text,
                                                         std::size_t first, std::size_t count,
                                                         Side side, std::size_t sentence_count) {
  std::vector<CriterionPrediction> out;
  out.reserve(count);
  auto parsed = llm::parse_json_object(text);
  for (std::size_t i = first; i < first + count; ++i) {
    if (!parsed) {
      out.push_back(failed_prediction(i, side));
      continue;
    }
    auto it = parsed->value.find(std::to_string(i));
    const json* entry = it == parsed->value.end() ? nullptr : &*it;
    out.push_back(parse_entry(entry, i, side, sentence_count, parsed->repaired));
  }
  return out;
}

std::vector<CriterionPrediction> parse_matching_response(const std::string& text,
                                                         std::size_t expected, Side side,
                                                         std::size_t sentence_count) {
  return parse_matching_response(text, 0, expected, side, sentence_count);
}

namespace {

constexpr std::string_view kReask =
    "\n\nYour previous reply could not be read. Reply with only the JSON object described above.";

std::vector<CriterionPrediction> match_side(const corpus::PatientNote& note,
                                            const corpus::TrialRecord& trial, Side side,
                                            llm::Gateway& gateway, const MatchingConfig& config,
                                            std::size_t* calls) {
  std::vector<CriterionPrediction> out;
  for (const auto& chunk : build_matching_prompts(note, trial, side, config)) {
    auto ask = [&](const std::string& user) {
      ++*calls;
      try {
        return gateway.complete(gateway.make_request(chunk.prompt.system, user)).text;
      } catch (const TransportError& e) {
        throw TransportError("(" + note.patient_id + ", " + trial.nct_id + ", " +
                             std::string(to_string(side)) + "): " + e.what());
      }
    };
    auto preds = parse_matching_response(ask(chunk.prompt.user), chunk.first, chunk.count, side,
                                         note.sentences.size());
    bool all_failed = std::all_of(preds.begin(), preds.end(), [](const CriterionPrediction& p) {
      return p.parse_status == ParseStatus::failed;
    });
    if (all_failed && config.reask_on_failure) {
      preds = parse_matching_response(ask(chunk.prompt.user + std::string(kReask)), chunk.first,
                                       chunk.count, side, note.sentences.size());
    }
    out.insert(out.end(), preds.begin(), preds.end());
  }
  return out;
}

}  // namespace

TrialMatchResult match_pair(const corpus::PatientNote& note, const corpus::TrialRecord& trial,
                            llm::Gateway& gateway, const MatchingConfig& config) {
  TrialMatchResult r;
  r.patient_id = note.patient_id;
  r.nct_id = trial.nct_id;
  r.inclusion_predictions = match_side(note, trial, Side::inclusion, gateway, config, &r.gateway_calls);
  r.exclusion_predictions = match_side(note, trial, Side::exclusion, gateway, config, &r.gateway_calls);
  return r;
}

// ---------------------------------------------------------------------------
// Cohort runs

namespace {

using PairKey = std::pair<std::string, std::string>;

std::map<PairKey, std::string> read_existing(const std::filesystem::path& path) {
  std::map<PairKey, std::string> lines;
  if (!std::filesystem::exists(path)) return lines;
  std::ifstream in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    try {
      auto r = match_result_from_json(json::parse(line));
      lines[{r.patient_id, r.nct_id}] = util::dump_line(to_json(r));
    } catch (const std::exception&) {
      spdlog::warn("{}: dropping unreadable line {}", path.string(), line_no);
    }
  }
  return lines;
}

}  // namespace

MatchRunSummary match_cohort(const std::vector<corpus::PatientNote>& patients,
                             const std::vector<corpus::TrialRecord>& trials,
                             const std::vector<retrieval::RetrievalResult>& retrieval,
                             llm::Gateway& gateway, const std::filesystem::path& output,
                             const MatchCohortOptions& options) {
  std::unordered_map<std::string, const corpus::PatientNote*> by_patient;
  for (const auto& p : patients) by_patient[p.patient_id] = &p;
  std::unordered_map<std::string, const corpus::TrialRecord*> by_trial;
  for (const auto& t : trials) by_trial[t.nct_id] = &t;

  MatchRunSummary summary;
  auto done = read_existing(output);

  struct Task {
    const corpus::PatientNote* note;
    const corpus::TrialRecord* trial;
  };
  std::vector<Task> tasks;
  for (const auto& result : retrieval) {
    auto pit = by_patient.find(result.patient_id);
    if (pit == by_patient.end()) {
      summary.failures.push_back({result.patient_id, "", "retrieval result for unknown patient"});
      continue;
    }
    std::size_t limit = options.max_candidates == 0 ? result.scored.size()
                                                    : std::min(options.max_candidates, result.scored.size());
    for (std::size_t i = 0; i < limit; ++i) {
      const auto& nct = result.scored[i].nct_id;
      ++summary.total_pairs;
      if (done.contains({result.patient_id, nct})) {
        ++summary.already_present;
        continue;
      }
      auto tit = by_trial.find(nct);
      if (tit == by_trial.end()) {
        summary.failures.push_back({result.patient_id, nct, "candidate trial not in corpus"});
        continue;
      }
      tasks.push_back({pit->second, tit->second});
    }
  }

  // Worker appends keep partial progress on disk for resumption.
  std::mutex write_mu;
  auto appender = util::open_output(output, std::ios::app);
  std::vector<MatchFailure> failures;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> matched{0};

  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const auto& task = tasks[i];
      try {
        auto r = match_pair(*task.note, *task.trial, gateway, options.matching);
        auto line = util::dump_line(to_json(r));
        std::lock_guard lock(write_mu);
        appender << line << '\n';
        appender.flush();
        done[{r.patient_id, r.nct_id}] = std::move(line);
        ++matched;
      } catch (const std::exception& e) {
        std::lock_guard lock(write_mu);
        failures.push_back({task.note->patient_id, task.trial->nct_id, e.what()});
      }
    }
  };
  {
    std::vector<std::jthread> workers;
    const auto n = std::max<std::size_t>(1, std::min(options.parallelism, tasks.size()));
    for (std::size_t w = 0; w < n; ++w) workers.emplace_back(work);
  }
  appender.close();

  auto tmp = output;
  tmp += ".tmp";
  {
    auto out = util::open_output(tmp);
    for (const auto& [key, line] : done) out << line << '\n';
  }
  std::filesystem::rename(tmp, output);

  std::sort(failures.begin(), failures.end(), [](const MatchFailure& a, const MatchFailure& b) {
    return std::tie(a.patient_id, a.nct_id) < std::tie(b.patient_id, b.nct_id);
  });
  summary.failures.insert(summary.failures.end(), failures.begin(), failures.end());
  summary.matched = matched.load();
  return summary;
}

std::vector<TrialMatchResult> load_matches(const std::filesystem::path& path) {
  std::vector<TrialMatchResult> out;
  auto in = util::open_input(path);
  util::for_each_jsonl(in, [&](const json& j, std::size_t line_no) {
    try {
      out.push_back(match_result_from_json(j));
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad match record: ") + e.what(), line_no);
    }
  });
  return out;
}

}  // namespace trialmatch::matching
