#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "valmon/metrics.hpp"
#include "valmon/outcome_analysis.hpp"

using namespace valmon;

TEST(Metrics, Values) {
  const std::vector<double> y{1, 2, 3, 4};
  const std::vector<double> p{1.5, 2, 2, 5};
  EXPECT_DOUBLE_EQ(*evaluate_metric(ErrorMetric::mae, y, p), 2.5 / 4);
  EXPECT_DOUBLE_EQ(*evaluate_metric(ErrorMetric::rmse, y, p), std::sqrt(2.25 / 4));
  const std::vector<double> yb{0, 1, 1, 0};
  const std::vector<double> pb{0.2, 0.7, 0.4, 0.6};
  EXPECT_DOUBLE_EQ(*evaluate_metric(ErrorMetric::error_rate, yb, pb), 0.5);
  EXPECT_FALSE(evaluate_metric(ErrorMetric::mae, std::vector<double>{}, std::vector<double>{}));
  EXPECT_THROW(require_compatible(ErrorMetric::auc, y), MetricIncompatible);
}

TEST(Metrics, AucMatchesSklearn) {
  const std::vector<double> y{0, 0, 1, 1, 0, 1, 0, 1, 1, 0};
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8, 0.4, 0.9, 0.2, 0.4, 0.65, 0.3};
  EXPECT_NEAR(*auc(y, s), 0.88, 1e-12);
  EXPECT_FALSE(auc(std::vector<double>{1, 1}, std::vector<double>{0.2, 0.3}));
}

TEST(Metrics, DefaultMetric) {
  const auto f = test::frame_of({{"a", {0, 0}}});
  EXPECT_EQ(default_metric(test::scored(f, {0, 1}, {0.3, 0.9})), ErrorMetric::error_rate);
  EXPECT_EQ(default_metric(test::scored(f, {0.5, 1}, {0.3, 0.9})), ErrorMetric::mae);
}

TEST(Segments, QuantileEdgesMatchNumpy) {
  const auto col = make_numeric("a", {3, 1, 4, 1, 5, 9, 2, 6});
  const auto e = resolve_edges(col, BinSpec::quantile(4));
  ASSERT_EQ(e.size(), 5u);
  EXPECT_DOUBLE_EQ(e[0], 1.0);
  EXPECT_DOUBLE_EQ(e[1], 1.75);
  EXPECT_DOUBLE_EQ(e[2], 3.5);
  EXPECT_DOUBLE_EQ(e[4], 9.0);
  EXPECT_THROW(resolve_edges(col, BinSpec::explicit_edges({1.0, 1.0})), InvalidArgument);
}

TEST(Segments, LabelsOutOfRangeAndMissing) {
  auto col = make_numeric("a", {0.5, 1.0, 2.0, 5.0, -1.0, 0.0});
  col.missing[5] = true;
  const std::vector<double> edges{0.0, 1.0, 2.0};
  const auto s = segment_by_edges(col, edges);
  auto label = [&](std::size_t row) { return s.labels[static_cast<std::size_t>(s.segment_ids[row])]; };
  EXPECT_EQ(label(0), "[0, 1)");
  EXPECT_EQ(label(1), "[1, 2]");
  EXPECT_EQ(label(2), "[1, 2]");
  EXPECT_EQ(label(3), "> 2");
  EXPECT_EQ(label(4), "< 0");
  EXPECT_EQ(label(5), kMissingSegment);
}

TEST(KMeans, SeparatesBlobsAndIsDeterministic) {
  Rng rng = derive_rng(9, 0);
  Eigen::MatrixXd m(90, 2);
  for (int i = 0; i < 90; ++i) {
    const double c = (i % 3) * 10.0;
    m.row(i) << c + standard_normal(rng) * 0.3, -c + standard_normal(rng) * 0.3;
  }
  const auto a = kmeans(m, 3, 4);
  const auto b = kmeans(m, 3, 4);
  EXPECT_EQ(a.assignment.segment_ids, b.assignment.segment_ids);
  EXPECT_TRUE(a.converged);
  for (int i = 3; i < 90; ++i) EXPECT_EQ(a.assignment.segment_ids[i], a.assignment.segment_ids[i % 3]);
  for (std::size_t i = 1; i < a.inertia_history.size(); ++i)
    EXPECT_LE(a.inertia_history[i], a.inertia_history[i - 1] + 1e-12);
  EXPECT_THROW(kmeans(m, 91, 0), KExceedsRows);
}

TEST(SegmentMetrics, LiftAndDegenerate) {
  const auto f = test::frame_of({{"a", {0, 0, 1, 1}}});
  const auto ds = test::scored(f, {0, 0, 0, 0}, {1, 1, 3, 3});
  SegmentAssignment seg{{0, 0, 1, 1}, {"lo", "hi"}, SegmentSource::binned};
  const auto t = segment_metrics(ds, seg, ErrorMetric::mae);
  EXPECT_DOUBLE_EQ(*t.overall, 2.0);
  EXPECT_DOUBLE_EQ(*t.rows[0].lift, 0.5);
  EXPECT_DOUBLE_EQ(*t.rows[1].lift, 1.5);

  const auto perfect = test::scored(f, {1, 1, 1, 1}, {1, 1, 1, 1});
  const auto z = segment_metrics(perfect, seg, ErrorMetric::mae);
  EXPECT_DOUBLE_EQ(*z.rows[0].lift, 1.0);
  EXPECT_TRUE(z.rows[0].degenerate);
}

TEST(WeakRegions, FindsPlantedRegion) {
  Rng rng = derive_rng(2, 0);
  std::vector<double> a(500), b(500), y(500), p(500);
  for (std::size_t i = 0; i < 500; ++i) {
    a[i] = uniform01(rng);
    b[i] = uniform01(rng);
    y[i] = 0.0;
    p[i] = (a[i] > 0.8 ? 5.0 : 1.0) * std::abs(standard_normal(rng));
  }
  const auto ds = test::scored(test::frame_of({{"a", a}, {"b", b}}), y, p);
  const auto regions = weak_region_scan(ds, {"a", "b"});
  ASSERT_FALSE(regions.empty());
  EXPECT_EQ(regions[0].feature, "a");
  EXPECT_GT(regions[0].lift, 2.0);
  for (std::size_t i = 1; i < regions.size(); ++i) EXPECT_LE(regions[i].lift, regions[i - 1].lift);
}

TEST(FitGap, FlagsOverAndUnderfit) {
  const auto f = test::frame_of({{"a", {0, 0, 1, 1}}});
  const FitGapBasis basis{"a", BinSpec::explicit_edges({0.0, 0.5, 1.0})};
  // Segment [0, 0.5): train error 0.01, test error 0.5; overall train 0.1.
  const auto train = test::scored(f, {0, 0, 0, 0}, {0.01, 0.01, 0.19, 0.19});
  const auto test_set = test::scored(f, {0, 0, 0, 0}, {0.5, 0.5, 0.1, 0.1});
  auto r = fit_gap(train, test_set, basis, ErrorMetric::mae);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_NEAR(*r.rows[0].gap, 0.49, 1e-12);
  EXPECT_EQ(r.rows[0].flag, FitFlag::overfit);
  EXPECT_EQ(r.rows[1].flag, FitFlag::ok);

  const auto bad = test::scored(f, {0, 0, 0, 0}, {0.1, 0.1, 3, 3});
  r = fit_gap(bad, bad, basis, ErrorMetric::mae);
  EXPECT_EQ(r.rows[0].flag, FitFlag::ok);
  EXPECT_EQ(r.rows[1].flag, FitFlag::underfit);

  r = fit_gap(train, test_set, std::nullopt, ErrorMetric::mae);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].segment, "all");
  EXPECT_EQ(r.rows[0].flag, FitFlag::overfit);
  r = fit_gap(train, train, std::nullopt, ErrorMetric::mae);
  EXPECT_EQ(r.rows[0].flag, FitFlag::ok);
}

TEST(Robustness, PerturbationRanksFeatures) {
  Rng rng = derive_rng(1, 0);
  const auto f = test::frame_of({{"big", test::normal_sample(rng, 200)}, {"small", test::normal_sample(rng, 200)}});
  FunctionModel model([](const FeatureFrame &fr) {
    std::vector<double> out(fr.n_rows());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = 10.0 * fr.numeric("big").values[i] + 0.1 * fr.numeric("small").values[i];
    return out;
  });
  const auto r = perturbation_test(model, f, 0.05, 5, 7);
  ASSERT_EQ(r.features.size(), 2u);
  EXPECT_GT(r.features[0].mean_abs_prediction_delta, 50 * r.features[1].mean_abs_prediction_delta);
  const auto again = perturbation_test(model, f, 0.05, 5, 7);
  EXPECT_EQ(r.features[0].mean_abs_prediction_delta, again.features[0].mean_abs_prediction_delta);
}

TEST(Robustness, Invariance) {
  Rng rng = derive_rng(1, 1);
  const auto f = test::frame_of({{"x", test::normal_sample(rng, 50)}, {"noise", test::normal_sample(rng, 50)}});
  FunctionModel uses_x([](const FeatureFrame &fr) { return fr.numeric("x").values; });
  auto r = invariance_test(uses_x, f, {"noise"}, InvarianceMode::permute, 3);
  EXPECT_TRUE(r.violating_rows.empty());
  EXPECT_EQ(r.max_abs_delta, 0.0);
  r = invariance_test(uses_x, f, {"x"}, InvarianceMode::constant, 3);
  EXPECT_FALSE(r.violating_rows.empty());
}
