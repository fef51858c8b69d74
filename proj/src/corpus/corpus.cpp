#include "trialmatch/corpus.hpp"

#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "trialmatch/error.hpp"
#include "util/jsonl.hpp"
#include "util/strings.hpp"

namespace trialmatch {

std::string_view to_string(Side side) {
  return side == Side::inclusion ? "inclusion" : "exclusion";
}

Side side_from_string(std::string_view text) {
  auto lowered = util::to_lower(util::trim(text));
  if (lowered == "inclusion") return Side::inclusion;
  if (lowered == "exclusion") return Side::exclusion;
  throw ParseError("unknown criterion side '" + std::string(text) + "'");
}

}  // namespace trialmatch

namespace trialmatch::corpus {

using nlohmann::json;

std::vector<Criterion> make_criteria(const std::vector<std::string>& texts, Side side) {
  std::vector<Criterion> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    out.push_back({out.size(), side, text});
  }
  return out;
}

PatientNote make_patient_note(std::string patient_id, std::string raw_text) {
  PatientNote note{std::move(patient_id), std::move(raw_text), {}};
  note.sentences = segment_sentences(note.raw_text);
  return note;
}

// ---------------------------------------------------------------------------
// Relevance labels

std::string_view to_string(RelevanceLabel label) {
  switch (label) {
    case RelevanceLabel::irrelevant: return "irrelevant";
    case RelevanceLabel::excluded: return "excluded";
    case RelevanceLabel::potential: return "potential";
    case RelevanceLabel::eligible: return "eligible";
    case RelevanceLabel::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::optional<RelevanceLabel> relevance_label_from_string(std::string_view text) {
  auto t = util::to_lower(util::trim(text));
  if (t == "irrelevant") return RelevanceLabel::irrelevant;
  if (t == "excluded" || t == "ineligible") return RelevanceLabel::excluded;
  if (t == "potential") return RelevanceLabel::potential;
  if (t == "eligible") return RelevanceLabel::eligible;
  if (t == "unlabeled") return RelevanceLabel::unlabeled;
  return std::nullopt;
}

int grade(RelevanceLabel label) noexcept {
  switch (label) {
    case RelevanceLabel::irrelevant:
    case RelevanceLabel::unlabeled: return 0;
    case RelevanceLabel::excluded:
    case RelevanceLabel::potential: return 1;
    case RelevanceLabel::eligible: return 2;
  }
  return 0;
}

LabelVocabulary::LabelVocabulary(std::map<std::string, RelevanceLabel> table)
    : table_(std::move(table)) {}

namespace {

std::map<std::string, RelevanceLabel> named_tokens() {
  std::map<std::string, RelevanceLabel> t;
  for (auto label : {RelevanceLabel::irrelevant, RelevanceLabel::excluded,
                     RelevanceLabel::potential, RelevanceLabel::eligible,
                     RelevanceLabel::unlabeled}) {
    t.emplace(std::string(to_string(label)), label);
  }
  t.emplace("ineligible", RelevanceLabel::excluded);
  return t;
}

}  // namespace

LabelVocabulary LabelVocabulary::trec() {
  auto t = named_tokens();
  t["0"] = RelevanceLabel::irrelevant;
  t["1"] = RelevanceLabel::excluded;
  t["2"] = RelevanceLabel::eligible;
  return LabelVocabulary(std::move(t));
}

LabelVocabulary LabelVocabulary::sigir() {
  auto t = named_tokens();
  t["0"] = RelevanceLabel::irrelevant;
  t["1"] = RelevanceLabel::potential;
  t["2"] = RelevanceLabel::eligible;
  return LabelVocabulary(std::move(t));
}

LabelVocabulary LabelVocabulary::named(std::string_view name) {
  auto n = util::to_lower(name);
  if (n == "trec") return trec();
  if (n == "sigir") return sigir();
  throw ConfigError("unknown label vocabulary '" + std::string(name) + "'");
}

LabelVocabulary LabelVocabulary::from_json(const json& j) {
  if (j.is_string()) return named(j.get<std::string>());
  if (!j.is_object()) throw ConfigError("label vocabulary must be a name or an object");
  std::map<std::string, RelevanceLabel> table;
  for (const auto& [token, value] : j.items()) {
    if (!value.is_string()) throw ConfigError("label for token '" + token + "' must be a string");
    auto label = relevance_label_from_string(value.get<std::string>());
    if (!label) throw ConfigError("unknown relevance label '" + value.get<std::string>() + "'");
    table.emplace(token, *label);
  }
  return LabelVocabulary(std::move(table));
}

std::optional<RelevanceLabel> LabelVocabulary::lookup(std::string_view token) const {
  auto it = table_.find(std::string(token));
  if (it != table_.end()) return it->second;
  auto lowered = table_.find(util::to_lower(token));
  if (lowered != table_.end()) return lowered->second;
  return std::nullopt;
}

void Cohort::validate() const {
  std::unordered_set<std::string> ids;
  for (const auto& p : patients) ids.insert(p.patient_id);
  for (std::size_t i = 0; i < judgments.size(); ++i) {
    if (!ids.contains(judgments[i].patient_id)) {
      throw ParseError("judgment for unknown patient '" + judgments[i].patient_id + "'", i + 1);
    }
  }
}

// ---------------------------------------------------------------------------
// Trials

namespace {

std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<std::string> string_list_field(const json& j, const char* key) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  if (!it->is_array()) throw ParseError(std::string("field '") + key + "' must be an array");
  for (const auto& v : *it) {
    if (!v.is_string()) throw ParseError(std::string("field '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<std::string> criteria_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (it->is_string()) return segment_criteria(it->get<std::string>());
  if (!it->is_array()) {
    throw ParseError(std::string("field '") + key + "' must be a string or an array");
  }
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw ParseError(std::string("field '") + key + "' must hold strings");
    auto text = util::trim(v.get_ref<const std::string&>());
    if (!text.empty()) out.emplace_back(text);
  }
  return out;
}

}  // namespace

TrialRecord trial_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("trial record must be a JSON object");
  TrialRecord t;
  t.nct_id = std::string(util::trim(string_field(j, "nct_id")));
  if (t.nct_id.empty()) throw ParseError("trial record is missing nct_id");
  t.title = string_field(j, "title");
  t.conditions = string_list_field(j, "conditions");
  t.interventions = string_list_field(j, "interventions");
  t.brief_summary = string_field(j, "brief_summary");
  t.inclusion_criteria = make_criteria(criteria_field(j, "inclusion_criteria"), Side::inclusion);
  t.exclusion_criteria = make_criteria(criteria_field(j, "exclusion_criteria"), Side::exclusion);
  return t;
}

json trial_to_json(const TrialRecord& trial) {
  auto texts = [](const std::vector<Criterion>& cs) {
    json arr = json::array();
    for (const auto& c : cs) arr.push_back(c.text);
    return arr;
  };
  json j;
  j["nct_id"] = trial.nct_id;
  j["title"] = trial.title;
  j["conditions"] = trial.conditions;
  j["interventions"] = trial.interventions;
  j["brief_summary"] = trial.brief_summary;
  j["inclusion_criteria"] = texts(trial.inclusion_criteria);
  j["exclusion_criteria"] = texts(trial.exclusion_criteria);
  return j;
}

std::vector<TrialRecord> parse_trial_corpus(std::istream& in) {
  std::vector<TrialRecord> trials;
  std::set<std::string> seen;
  util::for_each_jsonl(in, [&](const json& j, std::size_t line_no) {
    TrialRecord t;
    try {
      t = trial_from_json(j);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!seen.insert(t.nct_id).second) {
      throw ParseError("duplicate nct_id '" + t.nct_id + "'", line_no);
    }
    trials.push_back(std::move(t));
  });
  return trials;
}

std::vector<TrialRecord> parse_trial_corpus(const std::filesystem::path& path) {
  auto in = util::open_input(path);
  return parse_trial_corpus(in);
}

void write_trial_corpus(std::ostream& out, const std::vector<TrialRecord>& trials) {
  for (const auto& t : trials) out << util::dump_line(trial_to_json(t)) << '\n';
}

// ---------------------------------------------------------------------------
// Patients

json patient_to_json(const PatientNote& note) {
  return json{{"patient_id", note.patient_id}, {"text", note.raw_text}, {"sentences", note.sentences}};
}

std::vector<PatientNote> parse_patients(std::istream& in) {
  std::vector<PatientNote> notes;
  std::set<std::string> seen;
  util::for_each_jsonl(in, [&](const json& j, std::size_t line_no) {
    try {
      if (!j.is_object()) throw ParseError("patient record must be a JSON object");
      auto id = std::string(util::trim(string_field(j, "patient_id")));
      if (id.empty()) throw ParseError("patient record is missing patient_id");
      if (!seen.insert(id).second) throw ParseError("duplicate patient_id '" + id + "'");
      auto text = string_field(j, "text");
      if (j.contains("sentences")) {
        notes.push_back({id, text, string_list_field(j, "sentences")});
      } else {
        notes.push_back(make_patient_note(id, text));
      }
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  });
  return notes;
}

std::vector<PatientNote> parse_patients(const std::filesystem::path& path) {
  auto in = util::open_input(path);
  return parse_patients(in);
}

void write_patients(std::ostream& out, const std::vector<PatientNote>& notes) {
  for (const auto& n : notes) out << util::dump_line(patient_to_json(n)) << '\n';
}

// ---------------------------------------------------------------------------
// Qrels

std::vector<RelevanceJudgment> load_qrels(std::istream& in, const LabelVocabulary& vocab) {
  std::vector<RelevanceJudgment> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    auto fields = util::split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != 4) {
      throw ParseError("expected 4 columns 'topic iteration doc relevance', got " +
                           std::to_string(fields.size()),
                       row);
    }
    auto label = vocab.lookup(fields[3]);
    if (!label) throw ParseError("unknown relevance label '" + fields[3] + "'", row);
    out.push_back({fields[0], fields[2], *label, grade(*label)});
  }
  return out;
}

std::vector<RelevanceJudgment> load_qrels(const std::filesystem::path& path,
                                          const LabelVocabulary& vocab) {
  auto in = util::open_input(path);
  return load_qrels(in, vocab);
}

}  // namespace trialmatch::corpus
