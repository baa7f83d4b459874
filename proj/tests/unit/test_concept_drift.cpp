#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "valmon/concept_drift.hpp"

using namespace valmon;

namespace {

const std::vector<double> kX{0.3, -1.2, 2.5, 0.7, 1.1, -0.4, 3.2, 0.0, 1.9, -2.2};
const std::vector<double> kY{1.5, 0.2, 2.9, 3.3, -0.1, 1.8, 2.2, 4.0, 0.9, 2.6, 1.2, 3.7};

ScoredDataset regression(Rng &rng, std::size_t n, double shift, double offset) {
  std::vector<double> x1(n), x2(n), y(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = standard_normal(rng) + shift;
    x2[i] = standard_normal(rng);
    p[i] = 2 * x1[i] - x2[i];
    y[i] = p[i] + standard_normal(rng) + offset;
  }
  return test::scored(test::frame_of({{"x1", x1}, {"x2", x2}}), y, p);
}

}  // namespace

TEST(Cvm, MatchesScipy) {
  EXPECT_NEAR(cvm_statistic(kX, kY), 0.4045454545454543, 1e-12);
  EXPECT_NEAR(cvm_pvalue(0.4045454545454543, kX.size(), kY.size()), 0.07092098989610496, 1e-8);
}

TEST(Cvm, LimitCdf) {
  EXPECT_NEAR(cvm_limit_cdf(0.05), 0.12371906895864906, 1e-10);
  EXPECT_NEAR(cvm_limit_cdf(0.2), 0.7325295694592229, 1e-10);
  EXPECT_NEAR(cvm_limit_cdf(0.5), 0.9601667824343907, 1e-10);
  EXPECT_NEAR(cvm_limit_cdf(1.0), 0.9975395478198642, 1e-10);
}

TEST(NnMatch, ExactNeighbourAndTies) {
  const auto dev = test::frame_of({{"a", {0, 1, 2, 3}}});
  const auto cur = test::frame_of({{"a", {0.9, 2.5}}});
  const auto r = nn_match(cur, dev, 1);
  EXPECT_EQ(r.matched_dev_indices, (std::vector<std::size_t>{1, 2}));
  const auto k2 = nn_match(cur, dev, 2);
  EXPECT_EQ(k2.matched_dev_indices, (std::vector<std::size_t>{1, 0, 2, 3}));
  EXPECT_THROW(nn_match(cur, dev, 5), KExceedsRows);
  const auto mah = nn_match(cur, dev, 1, MatchMetric::mahalanobis);
  EXPECT_EQ(mah.matched_dev_indices, r.matched_dev_indices);
}

TEST(Classify, InputOnlyAndConcept) {
  Rng rng = derive_rng(21, 0);
  const auto ref = regression(rng, 600, 0.0, 0.0);
  const auto covariate = regression(rng, 400, 1.0, 0.0);
  const auto changed = regression(rng, 400, 0.0, 1.0);
  ConceptDriftConfig cfg;
  cfg.drift.multivariate_metrics = {};
  const auto a = classify_drift(ref, covariate, cfg);
  EXPECT_EQ(a.verdict, DriftVerdict::input_drift);
  EXPECT_TRUE(a.input_drift);
  const auto b = classify_drift(ref, changed, cfg);
  EXPECT_EQ(b.verdict, DriftVerdict::concept_drift);
  EXPECT_LT(b.residual_test.p_value, 0.01);
  cfg.test = ResidualTest::cvm;
  EXPECT_EQ(classify_drift(ref, changed, cfg).verdict, DriftVerdict::concept_drift);
}

TEST(Windows, RowWindows) {
  std::vector<double> y(100, 0.0), p(100), a(100, 0.0);
  for (std::size_t i = 0; i < 100; ++i) p[i] = i < 50 ? 1.0 : 2.0;
  const auto ds = test::scored(test::frame_of({{"a", a}}), y, p);
  const auto w = sliding_window_eval(ds, {WindowUnit::rows, 50, 25}, ErrorMetric::mae, 10);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_DOUBLE_EQ(*w[0].value, 1.0);
  EXPECT_DOUBLE_EQ(*w[1].value, 1.5);
  EXPECT_DOUBLE_EQ(*w[2].value, 2.0);
  EXPECT_THROW(sliding_window_eval(ds, {WindowUnit::time, 10, 5}, ErrorMetric::mae), NoTimestamps);
}

TEST(Windows, TimestampParsing) {
  EXPECT_DOUBLE_EQ(*parse_timestamp_seconds("86400"), 86400.0);
  EXPECT_DOUBLE_EQ(*parse_timestamp_seconds("1970-01-02"), 86400.0);
  EXPECT_DOUBLE_EQ(*parse_timestamp_seconds("1970-01-01T01:00:00Z"), 3600.0);
  EXPECT_FALSE(parse_timestamp_seconds("yesterday"));
}

TEST(Paired, MatchesScipyTtestRel) {
  const std::vector<double> a{1.2, 0.8, 1.5, 2.0, 0.9, 1.1, 1.7, 1.3};
  const std::vector<double> b{1.0, 0.9, 1.1, 1.6, 0.7, 1.2, 1.2, 1.0};
  const auto r = paired_model_comparison(a, b);
  EXPECT_NEAR(r.t_statistic, 2.8259362153024177, 1e-10);
  EXPECT_NEAR(r.p_value, 0.025554696085933266, 1e-10);
  EXPECT_EQ(r.better, Better::b);
  const auto tie = paired_model_comparison(a, a);
  EXPECT_EQ(tie.better, Better::tie);
  EXPECT_DOUBLE_EQ(tie.p_value, 1.0);
}

TEST(SegmentTracking, RatioToFirstBatch) {
  std::vector<double> a(100), y(100, 0.0), p1(100), p2(100);
  for (std::size_t i = 0; i < 100; ++i) {
    a[i] = static_cast<double>(i);
    p1[i] = 1.0;
    p2[i] = i >= 50 ? 3.0 : 1.0;
  }
  const std::vector<ScoredDataset> batches{test::scored(test::frame_of({{"a", a}}), y, p1),
                                           test::scored(test::frame_of({{"a", a}}), y, p2)};
  const auto s = segment_error_tracking(batches, "a", BinSpec::explicit_edges({0, 50, 99}), ErrorMetric::mae, 10);
  ASSERT_EQ(s.labels.size(), 2u);
  EXPECT_DOUBLE_EQ(*s.ratio_to_first[0][1], 1.0);
  EXPECT_DOUBLE_EQ(*s.ratio_to_first[1][1], 3.0);
}
