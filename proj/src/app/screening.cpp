#include "trialmatch/app/screening.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "util/jsonl.hpp"
#include "util/strings.hpp"

namespace trialmatch::app {

using nlohmann::json;

std::string_view to_string(Decision d) noexcept { return d == Decision::no ? "no" : "maybe"; }

std::optional<Decision> decision_from_string(std::string_view text) {
  auto t = util::to_lower(util::trim(text));
  if (t == "no") return Decision::no;
  if (t == "maybe") return Decision::maybe;
  return std::nullopt;
}

std::string utc_timestamp_now() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || util::trim(it->get<std::string>()).empty()) {
    throw ValidationError(std::string("'") + key + "' must be a non-empty string");
  }
  return it->get<std::string>();
}

}  // namespace

ScreeningDecision decision_from_json(const json& j, std::string_view now) {
  if (!j.is_object()) throw ValidationError("decision must be a JSON object");
  ScreeningDecision d;
  d.patient_id = required_string(j, "patient_id");
  d.nct_id = required_string(j, "nct_id");
  d.annotator_id = required_string(j, "annotator_id");

  auto dec = decision_from_string(required_string(j, "decision"));
  if (!dec) throw ValidationError("'decision' must be \"no\" or \"maybe\"");
  d.decision = *dec;

  auto assisted = j.find("assisted");
  if (assisted == j.end() || !assisted->is_boolean()) {
    throw ValidationError("'assisted' must be a boolean");
  }
  d.assisted = assisted->get<bool>();

  auto elapsed = j.find("elapsed_ms");
  if (elapsed == j.end() || !elapsed->is_number_integer()) {
    throw ValidationError("'elapsed_ms' must be an integer");
  }
  d.elapsed_ms = elapsed->get<std::int64_t>();
  if (d.elapsed_ms <= 0) throw ValidationError("'elapsed_ms' must be positive");

  auto ts = j.find("timestamp");
  if (ts != j.end() && ts->is_string() && !ts->get<std::string>().empty()) {
    d.timestamp = ts->get<std::string>();
  } else {
    d.timestamp = now.empty() ? utc_timestamp_now() : std::string(now);
  }
  return d;
}

json to_json(const ScreeningDecision& d) {
  return {{"patient_id", d.patient_id}, {"nct_id", d.nct_id},
          {"decision", to_string(d.decision)}, {"assisted", d.assisted},
          {"elapsed_ms", d.elapsed_ms},     {"annotator_id", d.annotator_id},
          {"timestamp", d.timestamp}};
}

DecisionLog::DecisionLog(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  auto in = util::open_input(path_);
  util::for_each_jsonl(in, [&](const json& j, std::size_t line_no) {
    ScreeningDecision d;
    try {
      d = decision_from_json(j);
    } catch (const ValidationError& e) {
      throw ParseError(path_.string() + ": " + e.what(), line_no);
    }
    if (!keys_.insert({d.patient_id, d.nct_id, d.annotator_id, d.assisted}).second) {
      spdlog::warn("{}: duplicate decision on line {} ignored", path_.string(), line_no);
      return;
    }
    decisions_.push_back(std::move(d));
  });
}

void DecisionLog::append(const ScreeningDecision& d) {
  std::lock_guard lock(mu_);
  Key key{d.patient_id, d.nct_id, d.annotator_id, d.assisted};
  if (keys_.contains(key)) {
    throw DuplicateDecision("decision already recorded for (" + d.patient_id + ", " + d.nct_id +
                            ", " + d.annotator_id + ", " + (d.assisted ? "assisted" : "unassisted") +
                            ")");
  }
  // One write call per line so a crash cannot interleave partial records.
  auto line = util::dump_line(to_json(d)) + '\n';
  auto out = util::open_output(path_, std::ios::app);
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.flush();
  if (!out) throw Error("failed to append to " + path_.string());
  keys_.insert(std::move(key));
  decisions_.push_back(d);
}

std::vector<ScreeningDecision> DecisionLog::decisions() const {
  std::lock_guard lock(mu_);
  return decisions_;
}

std::size_t DecisionLog::size() const {
  std::lock_guard lock(mu_);
  return decisions_.size();
}

std::string DecisionLog::export_csv() const { return decisions_csv(decisions()); }

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string decisions_csv(const std::vector<ScreeningDecision>& decisions) {
  std::string out = "patient_id,nct_id,decision,assisted,elapsed_ms,annotator_id,timestamp\n";
  for (const auto& d : decisions) {
    out += fmt::format("{},{},{},{},{},{},{}\n", csv_field(d.patient_id), csv_field(d.nct_id),
                       to_string(d.decision), d.assisted ? "true" : "false", d.elapsed_ms,
                       csv_field(d.annotator_id), csv_field(d.timestamp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assignment

std::vector<AnnotatorTask> ScreeningAssignment::tasks_for(std::string_view annotator) const {
  std::vector<AnnotatorTask> out;
  for (const auto& it : items) {
    if (it.assisted_annotator == annotator) out.push_back({it.patient_id, it.nct_id, true});
    if (it.unassisted_annotator == annotator) out.push_back({it.patient_id, it.nct_id, false});
  }
  return out;
}

bool ScreeningAssignment::has_annotator(std::string_view annotator) const {
  return std::find(annotators.begin(), annotators.end(), annotator) != annotators.end();
}

ScreeningAssignment build_screening_assignment(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::vector<std::string>& annotators, std::uint64_t seed) {
  if (annotators.size() != 2 || annotators[0] == annotators[1]) {
    throw ConfigError("screening assignment needs exactly two distinct annotators");
  }
  if (pairs.size() % 2 != 0) {
    throw ConfigError("screening assignment needs an even number of pairs, got " +
                      std::to_string(pairs.size()));
  }
  std::set<std::pair<std::string, std::string>> unique(pairs.begin(), pairs.end());
  if (unique.size() != pairs.size()) throw ConfigError("screening assignment pairs must be distinct");
  auto order = pairs;
  // Fisher-Yates on raw engine output, which is fully specified by the
  // standard, unlike the distribution classes.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
  ScreeningAssignment a;
  a.annotators = annotators;
  const std::size_t half = order.size() / 2;
  for (std::size_t i = 0; i < order.size(); ++i) {
    bool first_assisted = i < half;
    a.items.push_back({order[i].first, order[i].second,
                       first_assisted ? annotators[0] : annotators[1],
                       first_assisted ? annotators[1] : annotators[0]});
  }
  return a;
}

json to_json(const ScreeningAssignment& a) {
  auto items = json::array();
  for (const auto& it : a.items) {
    items.push_back({{"patient_id", it.patient_id},
                     {"nct_id", it.nct_id},
                     {"assisted", it.assisted_annotator},
                     {"unassisted", it.unassisted_annotator}});
  }
  return {{"annotators", a.annotators}, {"items", items}};
}

ScreeningAssignment assignment_from_json(const json& j) {
  ScreeningAssignment a;
  a.annotators = j.at("annotators").get<std::vector<std::string>>();
  for (const auto& it : j.at("items")) {
    a.items.push_back({it.at("patient_id").get<std::string>(), it.at("nct_id").get<std::string>(),
                       it.at("assisted").get<std::string>(), it.at("unassisted").get<std::string>()});
  }
  return a;
}

// ---------------------------------------------------------------------------
// Summary

namespace {

struct Cell {
  double assisted_sum = 0, unassisted_sum = 0;
  std::size_t n_assisted = 0, n_unassisted = 0;

  void add(const ScreeningDecision& d) {
    if (d.assisted) {
      assisted_sum += static_cast<double>(d.elapsed_ms);
      ++n_assisted;
    } else {
      unassisted_sum += static_cast<double>(d.elapsed_ms);
      ++n_unassisted;
    }
  }
};

std::optional<GroupTiming> finish(const std::string& key, const Cell& c) {
  if (c.n_assisted == 0 || c.n_unassisted == 0) return std::nullopt;
  GroupTiming g;
  g.key = key;
  g.n_assisted = c.n_assisted;
  g.n_unassisted = c.n_unassisted;
  g.mean_assisted_ms = c.assisted_sum / static_cast<double>(c.n_assisted);
  g.mean_unassisted_ms = c.unassisted_sum / static_cast<double>(c.n_unassisted);
  g.saving = 1.0 - g.mean_assisted_ms / g.mean_unassisted_ms;
  return g;
}

template <typename KeyFn>
std::vector<GroupTiming> group(const std::vector<ScreeningDecision>& ds, KeyFn key,
                               std::string_view kind, std::vector<std::string>& notes) {
  std::map<std::string, Cell> cells;
  for (const auto& d : ds) cells[key(d)].add(d);
  std::vector<GroupTiming> out;
  for (const auto& [k, c] : cells) {
    if (auto g = finish(k, c)) {
      out.push_back(*g);
    } else {
      notes.push_back(fmt::format("{} {} omitted: needs both assisted and unassisted decisions",
                                  kind, k));
    }
  }
  return out;
}

json timing_json(const GroupTiming& g) {
  return {{"key", g.key},
          {"mean_assisted_ms", g.mean_assisted_ms},
          {"mean_unassisted_ms", g.mean_unassisted_ms},
          {"n_assisted", g.n_assisted},
          {"n_unassisted", g.n_unassisted},
          {"saving", g.saving}};
}

}  // namespace

ScreeningSummary screening_summary(const std::vector<ScreeningDecision>& decisions,
                                   const AnswerKey* answer_key) {
  ScreeningSummary s;
  s.by_case = group(decisions, [](const auto& d) { return d.patient_id; }, "case", s.notes);
  s.by_trial = group(decisions, [](const auto& d) { return d.nct_id; }, "trial", s.notes);
  s.by_annotator =
      group(decisions, [](const auto& d) { return d.annotator_id; }, "annotator", s.notes);
  Cell all;
  for (const auto& d : decisions) all.add(d);
  s.overall = finish("overall", all);
  if (!s.overall) s.notes.push_back("overall omitted: needs both assisted and unassisted decisions");

  if (answer_key != nullptr) {
    std::size_t hit[2] = {0, 0}, total[2] = {0, 0};
    for (const auto& d : decisions) {
      auto it = answer_key->find({d.patient_id, d.nct_id});
      if (it == answer_key->end()) continue;
      ++total[d.assisted];
      if (it->second == d.decision) ++hit[d.assisted];
    }
    if (total[1] > 0) s.accuracy_assisted = static_cast<double>(hit[1]) / static_cast<double>(total[1]);
    if (total[0] > 0) s.accuracy_unassisted = static_cast<double>(hit[0]) / static_cast<double>(total[0]);
  }
  return s;
}

json ScreeningSummary::to_json() const {
  auto list = [](const std::vector<GroupTiming>& gs) {
    auto arr = json::array();
    for (const auto& g : gs) arr.push_back(timing_json(g));
    return arr;
  };
  json j{{"by_case", list(by_case)},
         {"by_trial", list(by_trial)},
         {"by_annotator", list(by_annotator)},
         {"overall", overall ? timing_json(*overall) : json(nullptr)},
         {"notes", notes}};
  if (accuracy_assisted) j["accuracy_assisted"] = *accuracy_assisted;
  if (accuracy_unassisted) j["accuracy_unassisted"] = *accuracy_unassisted;
  return j;
}

}  // namespace trialmatch::app
