#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "support.hpp"
#include "trialmatch/eval/metrics.hpp"

using namespace trialmatch;
using namespace trialmatch::eval;
using corpus::RelevanceLabel;
using testing_support::Gen;
using testing_support::TempDir;

namespace {

RelevanceLabel label_for_grade(int g) {
  return g == 2 ? RelevanceLabel::eligible : g == 1 ? RelevanceLabel::excluded : RelevanceLabel::irrelevant;
}

// Run over ids t0..t{n-1} in the given order; judgments from grades (-1 = unjudged).
RankedRun run_of(const std::vector<std::string>& ids) {
  RankedRun r{"p", {}};
  for (std::size_t i = 0; i < ids.size(); ++i) r.entries.emplace_back(ids[i], double(ids.size() - i));
  return r;
}

}  // namespace

TEST(Ndcg, HandCase) {
  PatientJudgments j{{"a", RelevanceLabel::eligible}, {"b", RelevanceLabel::irrelevant}, {"c", RelevanceLabel::excluded}};
  auto v = ndcg_at_k(run_of({"a", "b", "c"}), j, 3);
  ASSERT_TRUE(v);
  EXPECT_NEAR(*v, 0.95023, 1e-4);
  EXPECT_NEAR(*v, 2.5 / (2 + 1 / std::log2(3.0)), 1e-12);
}

TEST(Ndcg, IdealAndSingleAndUndefined) {
  PatientJudgments j{{"a", RelevanceLabel::eligible}, {"c", RelevanceLabel::excluded}};
  EXPECT_EQ(ndcg_at_k(run_of({"a", "c", "x"}), j, 10), 1.0);
  PatientJudgments one{{"a", RelevanceLabel::excluded}};
  EXPECT_EQ(ndcg_at_k(run_of({"a"}), one, 10), 1.0);
  PatientJudgments none{{"a", RelevanceLabel::irrelevant}};
  EXPECT_FALSE(ndcg_at_k(run_of({"a"}), none, 10));
  EXPECT_LT(*ndcg_at_k(run_of({"c", "a"}), j, 10), 1.0);
}

TEST(Precision, Fixtures) {
  PatientJudgments j{{"a", RelevanceLabel::eligible}, {"b", RelevanceLabel::excluded}, {"c", RelevanceLabel::irrelevant},
                     {"d", RelevanceLabel::eligible}};
  EXPECT_EQ(precision_at_k(run_of({"a", "b", "c", "d"}), j, 4), 0.625);
  EXPECT_EQ(precision_at_k(run_of({"a", "d"}), j, 2), 1.0);
  EXPECT_EQ(precision_at_k(run_of({"a"}), j, 4), 0.25);
}

TEST(Recall, Fixtures) {
  PatientJudgments j{{"a", RelevanceLabel::eligible}, {"b", RelevanceLabel::eligible}, {"c", RelevanceLabel::eligible},
                     {"d", RelevanceLabel::eligible}, {"e", RelevanceLabel::excluded}, {"f", RelevanceLabel::excluded}};
  EXPECT_DOUBLE_EQ(*recall_at_k(run_of({"a", "e", "z", "f"}), j, 3), 0.3);
  EXPECT_EQ(*recall_at_k(run_of({"a", "b", "c", "d", "e", "f"}), j, 100), 1.0);
  EXPECT_EQ(*recall_at_k(run_of({"x", "y"}), j, 2), 0.0);
  EXPECT_FALSE(recall_at_k(run_of({"x"}), PatientJudgments{{"x", RelevanceLabel::irrelevant}}, 1));
}

TEST(Auroc, Fixtures) {
  EXPECT_EQ(auroc({{0.9, true}, {0.8, true}, {0.3, false}, {0.2, false}}), 1.0);
  EXPECT_EQ(auroc({{0.9, true}, {0.3, true}, {0.8, false}, {0.2, false}}), 0.75);
  EXPECT_EQ(auroc({{0.5, true}, {0.5, false}, {0.5, true}}), 0.5);
  EXPECT_FALSE(auroc({{0.5, true}, {0.2, true}}));
}

TEST(MetricProperty, MatchesOraclesOn1000Instances) {
  Gen g(777);
  for (int iter = 0; iter < 1000; ++iter) {
    std::size_t n = 1 + g.below(30);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("t" + std::to_string(i));
    oracle::Grades grades;
    PatientJudgments judged;
    for (const auto& id : ids) {
      if (g.below(4) == 0) continue;  // unjudged
      int gr = g.between(0, 2);
      grades[id] = gr;
      judged[id] = label_for_grade(gr);
    }
    // Judged trials the run never retrieved.
    for (std::size_t extra = g.below(4); extra > 0; --extra) {
      std::string id = "u" + std::to_string(extra);
      int gr = g.between(0, 2);
      grades[id] = gr;
      judged[id] = label_for_grade(gr);
    }
    std::shuffle(ids.begin(), ids.end(), g.engine());
    auto run = run_of(ids);
    int total = 0;
    for (auto& [id, v] : grades) total += v;
    for (std::size_t k : {1u, 5u, 10u, 30u}) {
      auto rec = recall_at_k(run, judged, k);
      ASSERT_EQ(rec.has_value(), total > 0);
      if (rec) ASSERT_NEAR(*rec, oracle::recall(ids, grades, k), 1e-9);
      ASSERT_NEAR(precision_at_k(run, judged, k), oracle::precision(ids, grades, k), 1e-9);
    }
    auto nd = ndcg_at_k(run, judged, 10);
    ASSERT_EQ(nd.has_value(), total > 0);
    if (nd) {
      ASSERT_NEAR(*nd, oracle::ndcg(ids, grades, 10), 1e-9);
      ASSERT_GE(*nd, 0.0);
      ASSERT_LE(*nd, 1.0 + 1e-12);
    }

    std::vector<std::pair<double, bool>> scored;
    std::vector<double> pos, neg;
    for (std::size_t i = 0, m = 1 + g.below(30); i < m; ++i) {
      double s = double(g.below(8)) / 4.0;  // coarse values force ties
      bool label = g.coin();
      scored.emplace_back(s, label);
      (label ? pos : neg).push_back(s);
    }
    auto au = auroc(scored);
    ASSERT_EQ(au.has_value(), !pos.empty() && !neg.empty());
    if (au) ASSERT_NEAR(*au, oracle::auroc(pos, neg), 1e-9);
  }
}

TEST(MetricProperty, AurocLabelFlipSymmetry) {
  Gen g(12);
  int checked = 0;
  while (checked < 200) {
    std::vector<std::pair<double, bool>> scored, flipped;
    for (std::size_t i = 0, m = 2 + g.below(40); i < m; ++i) {
      double s = g.unit();
      if (g.below(5) == 0 && !scored.empty()) s = scored.back().first;
      bool label = g.coin();
      scored.emplace_back(s, label);
      flipped.emplace_back(s, !label);
    }
    auto a = auroc(scored), b = auroc(flipped);
    if (!a) continue;
    ASSERT_NEAR(*a, 1.0 - *b, 1e-12);
    ++checked;
  }
}

TEST(MetricProperty, NdcgIsOneExactlyForIdealTopK) {
  Gen g(8);
  for (int iter = 0; iter < 300; ++iter) {
    PatientJudgments j;
    std::vector<std::pair<int, std::string>> graded;
    for (int i = 0, n = 1 + int(g.below(15)); i < n; ++i) {
      int gr = g.between(0, 2);
      std::string id = "t" + std::to_string(i);
      j[id] = label_for_grade(gr);
      graded.emplace_back(gr, id);
    }
    if (std::none_of(graded.begin(), graded.end(), [](auto& p) { return p.first > 0; })) continue;
    std::sort(graded.begin(), graded.end(), [](auto& a, auto& b) { return a.first > b.first; });
    std::vector<std::string> ideal;
    for (auto& [gr, id] : graded) ideal.push_back(id);
    EXPECT_NEAR(*ndcg_at_k(run_of(ideal), j, 10), 1.0, 1e-12);
    std::shuffle(ideal.begin(), ideal.end(), g.engine());
    std::vector<int> top, best;
    for (std::size_t i = 0; i < ideal.size() && i < 10; ++i) top.push_back(corpus::grade(j[ideal[i]]));
    for (std::size_t i = 0; i < graded.size() && i < 10; ++i) best.push_back(graded[i].first);
    double v = *ndcg_at_k(run_of(ideal), j, 10);
    if (top == best) {
      EXPECT_NEAR(v, 1.0, 1e-12);
    } else {
      EXPECT_LT(v, 1.0 - 1e-12);
    }
  }
}

TEST(MetricProperty, RecallInvariantToPermutationInsideWindow) {
  Gen g(21);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<std::string> ids;
    PatientJudgments j;
    for (int i = 0; i < 20; ++i) {
      ids.push_back("t" + std::to_string(i));
      j[ids.back()] = label_for_grade(g.between(0, 2));
    }
    j["t0"] = RelevanceLabel::eligible;
    std::size_t k = 1 + g.below(20);
    double before = *recall_at_k(run_of(ids), j, k);
    std::shuffle(ids.begin(), ids.begin() + static_cast<long>(k), g.engine());
    EXPECT_EQ(*recall_at_k(run_of(ids), j, k), before);
  }
}

TEST(Evaluate, CohortMeanAndJudgedOnly) {
  // p1 ideal, p2 NDCG 0.5-ish; mean must equal arithmetic mean of per-patient values.
  CohortRuns c{"toy",
               {{"p1", "a", RelevanceLabel::eligible, 2}, {"p1", "b", RelevanceLabel::irrelevant, 0},
                {"p2", "a", RelevanceLabel::irrelevant, 0}, {"p2", "b", RelevanceLabel::eligible, 2}},
               {run_of({"a", "b"}), run_of({"x", "a", "b"})}};
  c.runs[0].patient_id = "p1";
  c.runs[1].patient_id = "p2";
  auto judged = evaluate_cohort(c, Task::ranking);
  EXPECT_EQ(judged.per_patient["p1"]["ndcg@10"], 1.0);
  EXPECT_NEAR(judged.per_patient["p2"]["ndcg@10"], 1 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(judged.means["ndcg@10"], (1.0 + 1 / std::log2(3.0)) / 2, 1e-12);

  EvalConfig full;
  full.judged_only = false;
  auto all = evaluate_cohort(c, Task::ranking, full);
  EXPECT_NEAR(all.per_patient["p2"]["ndcg@10"], 0.5, 1e-12);
}

TEST(Evaluate, IdealRunsGiveOnes) {
  CohortRuns c{"toy",
               {{"p1", "a", RelevanceLabel::eligible, 2}, {"p1", "b", RelevanceLabel::excluded, 1},
                {"p1", "c", RelevanceLabel::irrelevant, 0}},
               {run_of({"a", "b", "c"})}};
  c.runs[0].patient_id = "p1";
  EXPECT_EQ(evaluate_cohort(c, Task::ranking).means["ndcg@10"], 1.0);
  EXPECT_EQ(evaluate_cohort(c, Task::retrieval).means["recall@100"], 1.0);
  // Excluding task: the excluded trial should score highest.
  RankedRun ex{"p1", {{"b", 3}, {"a", 1}}};
  CohortRuns e{"toy", c.judgments, {ex}};
  auto rep = evaluate_cohort(e, Task::excluding);
  EXPECT_EQ(rep.means["auroc"], 1.0);
  EXPECT_EQ(rep.pooled["auroc"], 1.0);
}

TEST(Evaluate, EmptyOverlapThrows) {
  CohortRuns c{"toy", {{"p1", "a", RelevanceLabel::eligible, 2}}, {RankedRun{"p9", {{"a", 1}}}}};
  EXPECT_ANY_THROW(evaluate_cohort(c, Task::ranking));
}

TEST(Evaluate, MacroIsMeanOfCohortMeans) {
  auto make = [](std::string name, std::vector<std::string> order) {
    CohortRuns c{std::move(name),
                 {{"p1", "a", RelevanceLabel::eligible, 2}, {"p1", "b", RelevanceLabel::irrelevant, 0}},
                 {run_of(order)}};
    c.runs[0].patient_id = "p1";
    return c;
  };
  auto report = evaluate_cohorts({make("x", {"a", "b"}), make("y", {"b", "a"})}, Task::ranking);
  double mx = report.cohorts[0].means["ndcg@10"], my = report.cohorts[1].means["ndcg@10"];
  EXPECT_NEAR(report.macro["ndcg@10"], (mx + my) / 2, 1e-12);
  EXPECT_FALSE(report.to_text().empty());
  EXPECT_EQ(report.to_json()["task"], "ranking");
}

TEST(RunFile, RoundTrip) {
  TempDir dir;
  std::vector<RankedRun> runs{{"p1", {{"NCT2", 0.5}, {"NCT1", 0.25}}}, {"p0", {{"NCT3", 1.0 / 3}}}};
  write_run_file(dir / "r.run", runs, "tag");
  auto back = read_run_file(dir / "r.run");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].patient_id, "p1");
  EXPECT_EQ(back[0].entries, runs[0].entries);
  EXPECT_EQ(back[1].entries, runs[1].entries);
}

TEST(RunFile, NormalizeRejectsDuplicates) {
  RankedRun r{"p", {{"a", 1}, {"a", 2}}};
  EXPECT_ANY_THROW(r.normalize());
  RankedRun s{"p", {{"b", 1}, {"a", 1}, {"c", 2}}};
  s.normalize();
  EXPECT_EQ(s.entries[0].first, "c");
  EXPECT_EQ(s.entries[1].first, "a");
}
