#include <cmath>
#include <limits>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "trialmatch/error.hpp"
#include "trialmatch/llm/mock_backend.hpp"
#include "trialmatch/ranking/ranking.hpp"

using namespace trialmatch;
using namespace trialmatch::ranking;
using matching::CriterionPrediction;
using matching::EligibilityLabel;
using matching::ParseStatus;
using testing_support::Gen;
using testing_support::TempDir;

namespace {

matching::TrialMatchResult with_labels(std::vector<EligibilityLabel> inc, std::vector<EligibilityLabel> exc) {
  matching::TrialMatchResult r{"p", "NCT1", {}, {}, 0};
  for (std::size_t i = 0; i < inc.size(); ++i) {
    r.inclusion_predictions.push_back({i, Side::inclusion, "e", {}, inc[i], ParseStatus::ok});
  }
  for (std::size_t i = 0; i < exc.size(); ++i) {
    r.exclusion_predictions.push_back({i, Side::exclusion, "e", {}, exc[i], ParseStatus::ok});
  }
  return r;
}

TrialScore score_with(std::string nct, double met_inc, double unmet_inc, double met_exc, double unmet_exc,
                      double r, double s) {
  TrialScore t;
  t.patient_id = "p";
  t.nct_id = std::move(nct);
  t.linear.pct_met_inclusion = met_inc;
  t.linear.pct_unmet_inclusion = unmet_inc;
  t.linear.pct_met_exclusion = met_exc;
  t.linear.pct_unmet_exclusion = unmet_exc;
  t.llm.relevance = r;
  t.llm.eligibility = s;
  std::tie(t.combined_ranking, t.exclusion_score) = combine(t.linear, t.llm);
  return t;
}

using L = EligibilityLabel;

}  // namespace

TEST(Linear, InclusionFixture) {
  auto a = linear_aggregate(with_labels({L::included, L::included, L::not_applicable, L::not_included,
                                         L::not_enough_information},
                                        {}));
  EXPECT_EQ(a.m_effective, 4u);
  EXPECT_EQ(a.pct_met_inclusion, 0.5);
  EXPECT_EQ(a.pct_unmet_inclusion, 0.25);
  EXPECT_EQ(a.pct_noinfo_inclusion, 0.25);
}

TEST(Linear, ExclusionFixture) {
  auto a = linear_aggregate(with_labels({}, {L::excluded, L::not_excluded, L::not_applicable}));
  EXPECT_EQ(a.n_effective, 2u);
  EXPECT_EQ(a.pct_met_exclusion, 0.5);
  EXPECT_EQ(a.pct_unmet_exclusion, 0.5);
  EXPECT_EQ(a.pct_noinfo_exclusion, 0.0);
}

TEST(Linear, AllNotApplicableGivesZeros) {
  auto a = linear_aggregate(with_labels({L::not_applicable, L::not_applicable}, {L::not_applicable}));
  EXPECT_EQ(a, LinearAggregates{});
}

TEST(Linear, FailedPredictionCountsAsNoInformation) {
  auto r = with_labels({L::included}, {});
  r.inclusion_predictions.push_back(matching::failed_prediction(1, Side::inclusion));
  auto a = linear_aggregate(r);
  EXPECT_EQ(a.m_effective, 2u);
  EXPECT_EQ(a.pct_noinfo_inclusion, 0.5);
}

TEST(LinearProperty, MatchesCounterOn10000Multisets) {
  Gen g(11);
  const std::vector<L> inc_set{L::included, L::not_included, L::not_enough_information, L::not_applicable};
  const std::vector<L> exc_set{L::excluded, L::not_excluded, L::not_enough_information, L::not_applicable};
  for (int iter = 0; iter < 10000; ++iter) {
    std::vector<L> inc(g.below(12)), exc(g.below(12));
    for (auto& l : inc) l = inc_set[g.below(4)];
    for (auto& l : exc) l = exc_set[g.below(4)];
    auto a = linear_aggregate(with_labels(inc, exc));

    std::map<L, int> ci, ce;
    for (auto l : inc) ++ci[l];
    for (auto l : exc) ++ce[l];
    int m = ci[L::included] + ci[L::not_included] + ci[L::not_enough_information];
    int n = ce[L::excluded] + ce[L::not_excluded] + ce[L::not_enough_information];
    auto frac = [](int k, int d) { return d == 0 ? 0.0 : double(k) / d; };
    ASSERT_EQ(a.m_effective, std::size_t(m));
    ASSERT_EQ(a.n_effective, std::size_t(n));
    ASSERT_EQ(a.pct_met_inclusion, frac(ci[L::included], m));
    ASSERT_EQ(a.pct_unmet_inclusion, frac(ci[L::not_included], m));
    ASSERT_EQ(a.pct_noinfo_inclusion, frac(ci[L::not_enough_information], m));
    ASSERT_EQ(a.pct_met_exclusion, frac(ce[L::excluded], n));
    ASSERT_EQ(a.pct_unmet_exclusion, frac(ce[L::not_excluded], n));
    ASSERT_EQ(a.pct_noinfo_exclusion, frac(ce[L::not_enough_information], n));
  }
}

TEST(Aggregation, ParseAndClamp) {
  auto a = parse_aggregation_response(R"({"relevance_score_R": 80, "eligibility_score_S": 60})");
  EXPECT_EQ(a.relevance, 80);
  EXPECT_EQ(a.eligibility, 60);
  EXPECT_FALSE(a.clamped);

  auto b = parse_aggregation_response(R"({"relevance_score_R": 120, "eligibility_score_S": 90})");
  EXPECT_EQ(b.relevance, 100);
  EXPECT_EQ(b.eligibility, 90);
  EXPECT_TRUE(b.clamped);

  auto c = parse_aggregation_response(R"({"relevance_score_R": 40, "eligibility_score_S": -75})");
  EXPECT_EQ(c.relevance, 40);
  EXPECT_EQ(c.eligibility, -40);
  EXPECT_TRUE(c.clamped);

  auto d = parse_aggregation_response("no numbers");
  EXPECT_EQ(d.relevance, 0);
  EXPECT_EQ(d.eligibility, 0);
  EXPECT_TRUE(d.clamped);
  EXPECT_TRUE(d.parse_failed);

  auto e = parse_aggregation_response(R"({"relevance_score_R": "NaN", "eligibility_score_S": "inf"})");
  EXPECT_TRUE(e.parse_failed);
  EXPECT_EQ(e.relevance, 0);
}

TEST(AggregationProperty, RangeClosureUnderFuzz) {
  Gen g(3);
  const std::vector<std::string> specials{"\"NaN\"", "\"inf\"", "\"-inf\"", "\"1e400\"", "null", "\"abc\"",
                                          "1e308", "-1e308", "\"55\"", "true"};
  for (int iter = 0; iter < 5000; ++iter) {
    auto num = [&]() -> std::string {
      if (g.below(4) == 0) return specials[g.below(specials.size())];
      return std::to_string((g.unit() - 0.5) * 600);
    };
    std::string text = "{\"relevance_score_R\": " + num() + ", \"eligibility_score_S\": " + num() + "}";
    auto a = parse_aggregation_response(text);
    ASSERT_TRUE(std::isfinite(a.relevance) && std::isfinite(a.eligibility)) << text;
    ASSERT_GE(a.relevance, 0) << text;
    ASSERT_LE(a.relevance, 100) << text;
    ASSERT_LE(std::abs(a.eligibility), a.relevance) << text;
  }
}

TEST(Aggregation, PromptStatesConstraintsAndPredictions) {
  auto note = corpus::make_patient_note("p", "A woman. She has asthma.");
  corpus::TrialRecord trial;
  trial.nct_id = "NCT1";
  trial.inclusion_criteria = corpus::make_criteria({"asthma"}, Side::inclusion);
  auto r = with_labels({L::included}, {});
  r.inclusion_predictions[0].explanation = "She has asthma.";
  auto p = build_aggregation_prompt(note, trial, r);
  for (std::string s : {"relevance_score_R", "eligibility_score_S", "100 (fully relevant)", "from -R", "She has asthma."}) {
    EXPECT_NE(p.user.find(s), std::string::npos) << s;
  }
  auto header = llm::parse_request_header(p.user);
  ASSERT_TRUE(header);
  EXPECT_EQ(header->at("task"), "aggregation");
}

TEST(Aggregation, ThroughMockGateway) {
  auto backend = std::make_shared<llm::MockBackend>();
  backend->add({{}, {}, {{"task", "aggregation"}, {"patient_id", "p"}, {"nct_id", "NCT1"}},
                R"({"relevance_score_R": 80, "eligibility_score_S": 60})"});
  llm::Gateway gateway(backend);
  corpus::TrialRecord trial;
  trial.nct_id = "NCT1";
  auto a = llm_aggregate(corpus::make_patient_note("p", "Text."), trial, with_labels({}, {}), gateway);
  EXPECT_EQ(a.relevance, 80);
  EXPECT_EQ(a.eligibility, 60);
}

TEST(Combine, HandFixtures) {
  auto a = score_with("a", 1.0, 0, 0, 0, 80, 60);
  EXPECT_DOUBLE_EQ(a.combined_ranking, 2.4);
  EXPECT_DOUBLE_EQ(a.exclusion_score, -2.4);
  auto b = score_with("b", 0.5, 0.25, 0.5, 0, 40, -20);
  EXPECT_DOUBLE_EQ(b.combined_ranking, -1.3);
  EXPECT_DOUBLE_EQ(b.exclusion_score, 1.3);
  EXPECT_EQ(combine({}, {}).first, 0.0);
  EXPECT_EQ(rank_trials({b, a}, Feature::combination), (std::vector<std::string>{"a", "b"}));
}

TEST(Rank, SignsPerFeature) {
  auto zero = score_with("z", 0, 0, 0.0, 0, 0, 0);
  auto half = score_with("h", 0, 0, 0.5, 0, 0, 0);
  EXPECT_EQ(rank_trials({half, zero}, Feature::excl).front(), "z");

  auto unmet = score_with("u", 0, 0.5, 0, 0, 0, 0);
  EXPECT_EQ(rank_trials({unmet, zero}, Feature::not_inc).front(), "z");

  auto notex = score_with("n", 0, 0, 0, 0.9, 0, 0);
  EXPECT_EQ(rank_trials({zero, notex}, Feature::not_excl).front(), "n");
  EXPECT_DOUBLE_EQ(signed_feature(half, Feature::excl), -0.5);
  EXPECT_DOUBLE_EQ(signed_feature(unmet, Feature::not_inc), -0.5);
}

TEST(Rank, TiesByNctIdAndUnknownFeature) {
  auto b = score_with("NCT2", 0.5, 0, 0, 0, 10, 0), a = score_with("NCT1", 0.5, 0, 0, 0, 10, 0);
  for (auto f : all_features()) {
    EXPECT_EQ(rank_trials({b, a}, f).front(), "NCT1") << to_string(f);
    EXPECT_EQ(feature_from_string(to_string(f)), f);
  }
  EXPECT_THROW(feature_from_string("bogus"), ConfigError);
}

TEST(Scores, FileRoundTrip) {
  TempDir dir;
  auto s = score_with("NCT1", 0.75, 0.25, 0, 1, 73, -12);
  s.llm.raw_response = "{\"relevance_score_R\": 73}";
  s.linear.m_effective = 4;
  write_scores(dir / "s.jsonl", {s});
  auto back = load_scores(dir / "s.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], s);
}

TEST(Scores, ScoreMatchesRejectsUnknownTrial) {
  llm::Gateway gateway(std::make_shared<llm::MockBackend>());
  std::vector<corpus::PatientNote> patients{corpus::make_patient_note("p", "Text.")};
  EXPECT_ANY_THROW(score_matches(patients, {}, {with_labels({}, {})}, gateway));
}

TEST(Baseline, DualEncoderFixtures) {
  BaselineCriterionVectors v{{1, 0}, {{1, 0}, {0, 1}}, {{1, 0}}};
  auto [rank, excl] = baseline_dual_encoder_scores(v);
  EXPECT_EQ(rank, -0.5);
  EXPECT_EQ(excl, 1.0);

  BaselineCriterionVectors orth{{0, 1}, {{1, 0}}, {{1, 0}}};
  EXPECT_EQ(baseline_dual_encoder_scores(orth), std::make_pair(0.0, 0.0));

  BaselineCriterionVectors no_exc{{1, 1}, {{1, 0}, {1, 1}}, {}};
  EXPECT_EQ(baseline_dual_encoder_scores(no_exc), std::make_pair(1.5, 0.0));

  BaselineCriterionVectors bad{{1, 0}, {{1, 0, 0}}, {}};
  EXPECT_THROW(baseline_dual_encoder_scores(bad), Error);
}

TEST(Baseline, LabelMap) {
  EXPECT_EQ(baseline_label_map(NliLabel::entailment, Side::inclusion), L::included);
  EXPECT_EQ(baseline_label_map(NliLabel::contradiction, Side::inclusion), L::not_included);
  EXPECT_EQ(baseline_label_map(NliLabel::neutral, Side::inclusion), L::not_enough_information);
  EXPECT_EQ(baseline_label_map(NliLabel::entailment, Side::exclusion), L::excluded);
  EXPECT_EQ(baseline_label_map(NliLabel::contradiction, Side::exclusion), L::not_excluded);
  EXPECT_EQ(baseline_label_map(NliLabel::neutral, Side::exclusion), L::not_enough_information);
}

TEST(Baseline, CombinationFixtures) {
  LinearAggregates a;
  a.pct_met_inclusion = 0.5;
  a.pct_unmet_inclusion = 0.25;
  a.pct_met_exclusion = 0.5;
  a.pct_unmet_exclusion = 0.5;
  EXPECT_EQ(baseline_combination(a), std::make_pair(0.25, 1.5));

  LinearAggregates perfect;
  perfect.pct_met_inclusion = 1;
  perfect.pct_unmet_exclusion = 1;
  EXPECT_EQ(baseline_combination(perfect), std::make_pair(2.0, -1.0));
}

TEST(Baseline, NliRecordsFeedLinearAggregation) {
  BaselineNliRecord rec{"p", "NCT1", {NliLabel::entailment, NliLabel::neutral}, {NliLabel::contradiction}};
  auto a = linear_aggregate(nli_as_match_result(rec));
  EXPECT_EQ(a.pct_met_inclusion, 0.5);
  EXPECT_EQ(a.pct_unmet_exclusion, 1.0);
}
