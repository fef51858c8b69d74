#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "mutilate.hpp"
#include "support.hpp"
#include "trialmatch/llm/mock_backend.hpp"
#include "trialmatch/matching/matcher.hpp"

using namespace trialmatch;
using namespace trialmatch::matching;
using testing_support::Gen;
using testing_support::TempDir;

namespace {

corpus::PatientNote note_p(std::string id = "p1") {
  return corpus::make_patient_note(std::move(id), "A 58-year-old woman. She has asthma. No smoking history.");
}

corpus::TrialRecord trial_t(std::string id = "NCT001", std::size_t m = 2, std::size_t n = 1) {
  corpus::TrialRecord t;
  t.nct_id = std::move(id);
  t.title = "Asthma study";
  t.conditions = {"asthma"};
  std::vector<std::string> inc, exc;
  for (std::size_t i = 0; i < m; ++i) inc.push_back("inclusion item " + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i) exc.push_back("exclusion item " + std::to_string(i));
  t.inclusion_criteria = corpus::make_criteria(inc, Side::inclusion);
  t.exclusion_criteria = corpus::make_criteria(exc, Side::exclusion);
  return t;
}

std::string all_labels(std::size_t count, const std::string& label) {
  nlohmann::json j;
  for (std::size_t i = 0; i < count; ++i) {
    j[std::to_string(i)] = {{"explanation", "because"}, {"sentences", {0}}, {"label", label}};
  }
  return j.dump();
}

llm::MockFixture side_fixture(const std::string& pid, const std::string& nct, Side side, std::string response) {
  return {{}, {}, {{"task", "matching"}, {"patient_id", pid}, {"nct_id", nct}, {"side", std::string(to_string(side))}},
          std::move(response)};
}

}  // namespace

TEST(Labels, SideClosureAndNormalisation) {
  EXPECT_EQ(parse_label("Not Included", Side::inclusion), EligibilityLabel::not_included);
  EXPECT_EQ(parse_label("not-excluded", Side::exclusion), EligibilityLabel::not_excluded);
  EXPECT_EQ(parse_label("no relevant information", Side::exclusion), EligibilityLabel::not_enough_information);
  EXPECT_FALSE(parse_label("excluded", Side::inclusion));
  EXPECT_FALSE(parse_label("included", Side::exclusion));
  for (auto side : {Side::inclusion, Side::exclusion}) {
    for (auto l : labels_for(side)) {
      EXPECT_TRUE(belongs_to(l, side));
      EXPECT_EQ(parse_label(display_name(l), side), l);
      EXPECT_EQ(parse_label(to_string(l), side), l);
    }
  }
}

TEST(Prompt, ContainsNumberedSentencesCriteriaAndVocabulary) {
  auto note = note_p();
  auto trial = trial_t();
  auto p = build_matching_prompt(note, trial, Side::inclusion);
  ASSERT_TRUE(p);
  for (std::string s : {"0. A 58-year-old woman.", "1. She has asthma.", "2. No smoking history.",
                        "0. inclusion item 0", "1. inclusion item 1", "\"not enough information\"",
                        "\"not applicable\"", "\"not included\"", "Title: Asthma study"}) {
    EXPECT_NE(p->user.find(s), std::string::npos) << s;
  }
  auto expl = p->user.find("\"explanation\":"), sent = p->user.find("\"sentences\":"), lab = p->user.find("\"label\":");
  EXPECT_LT(expl, sent);
  EXPECT_LT(sent, lab);
  EXPECT_EQ(build_matching_prompt(note, trial, Side::inclusion), p);

  auto ex = build_matching_prompt(note, trial, Side::exclusion);
  ASSERT_TRUE(ex);
  EXPECT_NE(ex->user.find("\"not excluded\""), std::string::npos);
  EXPECT_FALSE(build_matching_prompt(note, trial_t("NCT2", 1, 0), Side::exclusion));
}

TEST(Prompt, ChunksKeepGlobalNumbering) {
  auto trial = trial_t("NCT9", 40, 0);
  MatchingConfig c;
  c.prompt_token_budget = 250;
  auto chunks = build_matching_prompts(note_p(), trial, Side::inclusion, c);
  ASSERT_GT(chunks.size(), 1u);
  std::size_t next = 0;
  for (const auto& ch : chunks) {
    EXPECT_EQ(ch.first, next);
    EXPECT_GT(ch.count, 0u);
    next += ch.count;
  }
  EXPECT_EQ(next, 40u);
}

TEST(Parse, WellFormedFencedAndProse) {
  std::string ok = R"({"0":{"explanation":"Patient is 58, criterion requires >=18.","sentences":[0],"label":"included"}})";
  auto a = parse_matching_response(ok, 1, Side::inclusion, 3);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].parse_status, ParseStatus::ok);
  EXPECT_EQ(a[0].label, EligibilityLabel::included);
  EXPECT_EQ(a[0].relevant_sentences, std::vector<std::size_t>{0});

  auto b = parse_matching_response("```json\n" + ok + "\n```", 1, Side::inclusion, 3);
  EXPECT_EQ(b[0].parse_status, ParseStatus::repaired);
  EXPECT_EQ(b[0].label, EligibilityLabel::included);

  auto c = parse_matching_response("I cannot determine this.", 1, Side::inclusion, 3);
  EXPECT_EQ(c[0].parse_status, ParseStatus::failed);
  EXPECT_EQ(c[0].label, EligibilityLabel::not_enough_information);
}

TEST(Parse, OutOfRangeSentencesDroppedAndMissingCriteriaFilled) {
  auto p = parse_matching_response(
      R"({"0":{"explanation":"x","sentences":[2,7,-1,2,0],"label":"Not Included"}})", 3, Side::inclusion, 3);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0].relevant_sentences, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(p[0].parse_status, ParseStatus::repaired);
  EXPECT_EQ(p[0].label, EligibilityLabel::not_included);
  EXPECT_EQ(p[1].parse_status, ParseStatus::failed);
  EXPECT_EQ(p[2].criterion_index, 2u);
}

TEST(Parse, WrongSideLabelFails) {
  auto p = parse_matching_response(R"({"0":{"explanation":"x","sentences":[],"label":"excluded"}})", 1,
                                   Side::inclusion, 1);
  EXPECT_EQ(p[0].parse_status, ParseStatus::failed);
  EXPECT_EQ(p[0].label, EligibilityLabel::not_enough_information);
}

TEST(ParseProperty, MutilatedResponsesKeepInvariants) {
  Gen g(424242);
  for (int iter = 0; iter < 10000; ++iter) {
    auto side = g.coin() ? Side::inclusion : Side::exclusion;
    std::size_t expected = g.below(8);
    std::size_t sentences = 1 + g.below(12);
    auto text = testing_support::mutilated_response(g, expected, side, sentences);
    std::vector<CriterionPrediction> preds;
    ASSERT_NO_THROW(preds = parse_matching_response(text, expected, side, sentences)) << text;
    auto why = testing_support::prediction_violations(preds, 0, expected, side, sentences);
    ASSERT_TRUE(why.empty()) << why << "\n" << text;
  }
}

TEST(MatchPair, TwoCallsAndThreePredictions) {
  auto backend = std::make_shared<llm::MockBackend>();
  backend->add(side_fixture("p1", "NCT001", Side::inclusion, all_labels(2, "included")));
  backend->add(side_fixture("p1", "NCT001", Side::exclusion, all_labels(1, "not excluded")));
  llm::Gateway gateway(backend);
  auto r = match_pair(note_p(), trial_t(), gateway);
  EXPECT_EQ(r.gateway_calls, 2u);
  EXPECT_EQ(gateway.backend_calls(), 2u);
  EXPECT_EQ(r.inclusion_predictions.size(), 2u);
  EXPECT_EQ(r.exclusion_predictions.size(), 1u);
  EXPECT_EQ(r.exclusion_predictions[0].label, EligibilityLabel::not_excluded);
  EXPECT_EQ(match_pair(note_p(), trial_t(), gateway), r);
  EXPECT_EQ(match_result_from_json(to_json(r)), r);
}

TEST(MatchPair, EmptyExclusionSideMakesOneCall) {
  auto backend = std::make_shared<llm::MockBackend>();
  backend->add(side_fixture("p1", "NCT001", Side::inclusion, all_labels(2, "included")));
  llm::Gateway gateway(backend);
  auto r = match_pair(note_p(), trial_t("NCT001", 2, 0), gateway);
  EXPECT_EQ(r.gateway_calls, 1u);
  EXPECT_TRUE(r.exclusion_predictions.empty());
}

TEST(MatchPair, ReaskOnlyWhenEnabled) {
  auto backend = std::make_shared<llm::MockBackend>();
  llm::Gateway gateway(backend);
  MatchingConfig c;
  EXPECT_EQ(match_pair(note_p(), trial_t(), gateway, c).gateway_calls, 2u);
  c.reask_on_failure = true;
  EXPECT_EQ(match_pair(note_p(), trial_t(), gateway, c).gateway_calls, 4u);
}

TEST(MatchPair, TransportErrorIsTagged) {
  struct Down : llm::Backend {
    std::string id() const override { return "down"; }
    llm::BackendReply send(const llm::ChatRequest&) override { throw TransportError("refused"); }
  };
  llm::Gateway gateway(std::make_shared<Down>());
  try {
    match_pair(note_p(), trial_t(), gateway);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("(p1, NCT001, inclusion)"), std::string::npos) << e.what();
  }
}

namespace {

struct CohortFixture {
  std::vector<corpus::PatientNote> patients{note_p("p1"), note_p("p2")};
  std::vector<corpus::TrialRecord> trials{trial_t("NCT001"), trial_t("NCT002"), trial_t("NCT003")};
  std::vector<retrieval::RetrievalResult> retrieval{
      {"p1", {{"NCT003", 3}, {"NCT001", 2}, {"NCT002", 1}}, false},
      {"p2", {{"NCT002", 3}, {"NCT001", 2}, {"NCT003", 1}}, false}};

  std::shared_ptr<llm::MockBackend> backend() const {
    auto b = std::make_shared<llm::MockBackend>();
    for (const auto& p : patients) {
      for (const auto& t : trials) {
        b->add(side_fixture(p.patient_id, t.nct_id, Side::inclusion, all_labels(2, "included")));
        b->add(side_fixture(p.patient_id, t.nct_id, Side::exclusion, all_labels(1, "not excluded")));
      }
    }
    return b;
  }
};

}  // namespace

TEST(MatchCohort, SortedOutputAndResume) {
  CohortFixture f;
  TempDir dir;
  auto out = dir / "matches.jsonl";

  // Simulate an interrupted run: four of the six pairs already on disk,
  // written out of order.
  {
    llm::Gateway g(f.backend());
    std::ofstream os(out);
    for (auto [pid, nct] : {std::pair{"p2", "NCT003"}, {"p1", "NCT002"}, {"p2", "NCT001"}, {"p1", "NCT001"}}) {
      auto note = pid == std::string("p1") ? f.patients[0] : f.patients[1];
      auto trial = *std::find_if(f.trials.begin(), f.trials.end(), [&](auto& t) { return t.nct_id == nct; });
      os << to_json(match_pair(note, trial, g)).dump() << '\n';
    }
  }
  llm::Gateway gateway(f.backend());
  auto summary = match_cohort(f.patients, f.trials, f.retrieval, gateway, out);
  EXPECT_EQ(summary.total_pairs, 6u);
  EXPECT_EQ(summary.already_present, 4u);
  EXPECT_EQ(summary.matched, 2u);
  EXPECT_EQ(gateway.backend_calls(), 4u);
  EXPECT_TRUE(summary.failures.empty());

  auto results = load_matches(out);
  ASSERT_EQ(results.size(), 6u);
  for (std::size_t i = 1; i < results.size(); ++i) {
    EXPECT_LT(std::tie(results[i - 1].patient_id, results[i - 1].nct_id),
              std::tie(results[i].patient_id, results[i].nct_id));
  }
}

TEST(MatchCohort, PermanentFailureIsRecorded) {
  struct Flaky : llm::Backend {
    std::shared_ptr<llm::MockBackend> inner;
    std::string id() const override { return "flaky"; }
    llm::BackendReply send(const llm::ChatRequest& r) override {
      auto h = llm::parse_request_header(r.user_text);
      if (h && h->at("patient_id") == "p2" && h->at("nct_id") == "NCT001") throw TransportError("gone");
      return inner->send(r);
    }
  };
  CohortFixture f;
  auto flaky = std::make_shared<Flaky>();
  flaky->inner = f.backend();
  TempDir dir;
  llm::Gateway gateway(flaky);
  MatchCohortOptions opt;
  opt.parallelism = 3;
  auto summary = match_cohort(f.patients, f.trials, f.retrieval, gateway, dir / "m.jsonl", opt);
  EXPECT_EQ(summary.matched, 5u);
  ASSERT_EQ(summary.failures.size(), 1u);
  EXPECT_EQ(summary.failures[0].patient_id, "p2");
  EXPECT_EQ(summary.failures[0].nct_id, "NCT001");
  EXPECT_EQ(load_matches(dir / "m.jsonl").size(), 5u);
}

TEST(MatchCohort, OutputIndependentOfParallelism) {
  CohortFixture f;
  TempDir dir;
  std::string first;
  for (std::size_t par : {1u, 2u, 6u}) {
    auto out = dir / ("m" + std::to_string(par) + ".jsonl");
    llm::Gateway gateway(f.backend());
    MatchCohortOptions opt;
    opt.parallelism = par;
    match_cohort(f.patients, f.trials, f.retrieval, gateway, out, opt);
    auto text = testing_support::read_file(out);
    if (first.empty()) first = text;
    EXPECT_EQ(text, first);
  }
}
