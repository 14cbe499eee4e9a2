#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "threshkit/threshkit.hpp"

using namespace threshkit;

namespace {

Dataset holdout(const std::vector<std::int64_t>& values, const std::vector<bool>& faulty) {
  Dataset ds;
  ds.tool_tag = "T";
  ds.project_tag = "P3";
  ds.metric_names = {"M"};
  for (std::size_t i = 0; i < values.size(); ++i) {
    FunctionRecord r;
    r.key = {"P3", "h.c", "f" + std::to_string(i)};
    r.metrics = {{"M", values[i]}};
    r.number_of_failures = faulty[i] ? 1 : 0;
    ds.records.push_back(r);
  }
  return ds;
}

MetricEvaluation eval_of(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
  ConfusionCounts c;
  c.tp = tp;
  c.fp = fp;
  c.tn = tn;
  c.fn = fn;
  return evaluate(c, "M");
}

}  // namespace

TEST(DeriveThreshold, ConstantFives) {
  const auto r = derive_threshold(std::vector<std::int64_t>(100, 5), 0.05);
  ASSERT_TRUE(r.threshold);
  EXPECT_EQ(*r.threshold, 4);
  EXPECT_EQ(r.iterations, 6u);  // T = 0..5 tested
}

TEST(DeriveThreshold, AllZeroGivesNone) {
  const auto r = derive_threshold(std::vector<std::int64_t>(50, 0), 0.05);
  EXPECT_FALSE(r.threshold);
  EXPECT_EQ(r.iterations, 1u);
}

TEST(DeriveThreshold, TracksHodgesLehmannBound) {
  std::mt19937_64 rng(30);
  // symmetric around 30: 30 + (a - b) with a, b iid Poisson(6)
  std::poisson_distribution<int> pois(6.0);
  std::vector<std::int64_t> x(200);
  for (auto& v : x) v = 30 + pois(rng) - pois(rng);
  const auto r = derive_threshold(x, 0.05);
  ASSERT_TRUE(r.threshold && r.hl_bound);
  const std::vector<double> xd(x.begin(), x.end());
  EXPECT_NEAR(oracle::median_sorted(oracle::walsh(xd)), 30.0, 1.0);
  EXPECT_LE(std::abs(static_cast<double>(*r.threshold) - std::floor(*r.hl_bound)), 1.0);
}

TEST(DeriveThreshold, InversionInvariant) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 30; ++k) {
    std::vector<std::int64_t> x(10 + rng() % 300);
    for (auto& v : x) v = static_cast<std::int64_t>(rng() % 40);
    const std::vector<double> xd(x.begin(), x.end());
    const auto r = derive_threshold(x, 0.05);
    const auto rejects = [&](std::int64_t mu) {
      return stats::signed_rank_test(xd, static_cast<double>(mu)).rejects(0.05);
    };
    if (r.threshold) {
      EXPECT_GE(*r.threshold, 0);
      EXPECT_TRUE(rejects(*r.threshold));
      EXPECT_FALSE(rejects(*r.threshold + 1));
    } else {
      EXPECT_FALSE(rejects(0));
    }
  }
}

TEST(DeriveThreshold, Errors) {
  EXPECT_THROW(derive_threshold({}, 0.05), InputError);
  EXPECT_THROW(derive_threshold({1, -2}, 0.05), InputError);
  EXPECT_THROW(derive_threshold({1, 2}, 0.0), InputError);
}

TEST(Classify, StrictBoundary) {
  static_assert(!classify(7, 7));
  static_assert(classify(8, 7));
  static_assert(!classify(0, 0));
}

TEST(Confusion, HandCountedFixture) {
  //            T = 10:  >10?   faulty
  const std::vector<std::int64_t> v{12, 3, 10, 11, 25, 0, 9, 40, 10, 15};
  const std::vector<bool> f{true, true, true, false, true, false, false, false, false, true};
  // tp: 12, 25, 15 | fn: 3, 10 | fp: 11, 40 | tn: 0, 9, 10
  const auto c = confusion(holdout(v, f), "M", 10);
  EXPECT_EQ(c.tp, 3u);
  EXPECT_EQ(c.fn, 2u);
  EXPECT_EQ(c.fp, 2u);
  EXPECT_EQ(c.tn, 3u);
  EXPECT_EQ(c.total(), v.size());
}

TEST(Confusion, DegenerateFlagSets) {
  const auto all = confusion(holdout({5, 6, 7}, {true, true, true}), "M", 1);
  EXPECT_EQ(all.tp, 3u);
  EXPECT_EQ(all.fp + all.tn + all.fn, 0u);
  const auto none = confusion(holdout({5, 6, 7}, {true, false, true}), "M", 100);
  EXPECT_EQ(none.tp + none.fp, 0u);
  EXPECT_THROW(confusion(holdout({1}, {true}), "Other", 1), InputError);
}

TEST(Evaluate, Arithmetic) {
  const auto e = eval_of(9, 1, 79, 11);
  EXPECT_DOUBLE_EQ(e.precision, 0.9);
  EXPECT_DOUBLE_EQ(e.recall, 0.45);
  EXPECT_DOUBLE_EQ(e.accuracy, 0.88);
  EXPECT_EQ(eval_of(4, 0, 3, 3).precision, 1.0);
  EXPECT_THROW(eval_of(0, 0, 5, 5), DegenerateError);
  EXPECT_THROW(eval_of(0, 5, 5, 0), DegenerateError);
}

TEST(Evaluate, ReportRowLayout) {
  MetricEvaluation e;
  e.metric = "CCM";
  e.precision = 0.8712;
  e.recall = 0.4529;
  e.accuracy = 0.6801;
  EXPECT_EQ(fmtx::latex_row({e.metric, fmtx::fixed3(e.precision), fmtx::fixed3(e.recall), fmtx::fixed3(e.accuracy)}),
            "CCM & 0.871 & 0.453 & 0.680 \\\\ \\hline\n");
}

namespace {
MetricEvaluation pra(const char* m, double p, double r, double a) {
  MetricEvaluation e;
  e.metric = m;
  e.precision = p;
  e.recall = r;
  e.accuracy = a;
  return e;
}
}  // namespace

TEST(MacroAggregate, Coverity) {
  const auto s = macro_aggregate({pra("CCM", 0.871, 0.453, 0.680), pra("HalstedEffort", 0.843, 0.424, 0.671),
                                  pra("OperandCount", 0.841, 0.421, 0.682), pra("OperationCount", 0.795, 0.482, 0.679)},
                                 "Coverity");
  EXPECT_NEAR(s.precision.mean, 0.8375, 1e-12);
  EXPECT_NEAR(s.precision.q1, 0.8295, 1e-12);
  EXPECT_EQ(fmtx::fixed3(s.precision.q3), "0.850");
  EXPECT_NEAR(s.recall.mean, 0.445, 1e-12);
  EXPECT_NEAR(s.accuracy.mean, 0.678, 1e-12);
  EXPECT_EQ(s.metric_count, 4u);
}

TEST(MacroAggregate, UnderstandAndSingle) {
  const auto s = macro_aggregate(
      {pra("CountInput", .751, .440, .646), pra("CountLineCodeDecl", .790, .438, .660),
       pra("CountLineCodeExe", .888, .436, .690), pra("CountOutput", .855, .409, .669),
       pra("Cyclomatic", .892, .437, .692), pra("CyclomaticModified", .881, .413, .678),
       pra("CyclomaticStrict", .899, .443, .689), pra("Essential", .888, .379, .665), pra("Knots", .891, .395, .673),
       pra("MaxNesting", .856, .328, .635)});
  EXPECT_NEAR(s.precision.mean, 0.8591, 1e-12);
  EXPECT_NEAR(s.precision.q1, 0.85525, 1e-12);
  EXPECT_NEAR(s.precision.q3, 0.89025, 1e-12);
  EXPECT_NEAR(s.recall.mean, 0.4118, 1e-12);
  EXPECT_NEAR(s.accuracy.mean, 0.6697, 1e-12);
  EXPECT_LE(s.recall.q1, s.recall.q3);

  const auto one = macro_aggregate({pra("X", 0.7, 0.2, 0.5)});
  EXPECT_EQ(one.precision.mean, 0.7);
  EXPECT_EQ(one.precision.q1, 0.7);
  EXPECT_EQ(one.precision.q3, 0.7);
  EXPECT_THROW(macro_aggregate({}), DegenerateError);
}

TEST(SelectForQa, PrecisionFloorAndAllowList) {
  const std::vector<MetricEvaluation> ev = {pra("Cyclomatic", .892, 0, 0), pra("Essential", .888, 0, 0),
                                            pra("Knots", .891, 0, 0), pra("CountInput", .751, 0, 0),
                                            pra("CountOutput", .850, 0, 0)};
  EXPECT_EQ(select_for_qa(ev, 0.85), (std::vector<std::string>{"CountOutput", "Cyclomatic", "Essential", "Knots"}));
  EXPECT_EQ(select_for_qa(ev, 0.85, {"Cyclomatic", "CountOutput", "CountInput"}),
            (std::vector<std::string>{"CountOutput", "Cyclomatic"}));
}
