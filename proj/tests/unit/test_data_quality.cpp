#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "valmon/data_quality.hpp"

using namespace valmon;

TEST(Missingness, Profile) {
  auto a = make_numeric("a", {1, 2, 3, 4});
  a.missing = {false, true, false, false};
  auto c = CategoricalColumn::from_labels("c", {"x", std::nullopt, std::nullopt, "y"});
  const FeatureFrame frame(std::vector<Column>{a, c});
  const auto p = profile_missingness(frame);
  ASSERT_EQ(p.columns.size(), 2u);
  EXPECT_EQ(p.columns[0].missing_count, 1u);
  EXPECT_DOUBLE_EQ(p.columns[1].missing_fraction, 0.5);
  EXPECT_DOUBLE_EQ(p.row_complete_fraction, 0.5);
}

TEST(Impute, Strategies) {
  auto a = make_numeric("a", {1, 0, 3, 10});
  a.missing = {false, true, false, false};
  auto c = CategoricalColumn::from_labels("c", {"x", "y", std::nullopt, "x"});
  const FeatureFrame frame(std::vector<Column>{a, c});

  const auto med = impute(frame, {{"a", ImputeStrategy::median}, {"c", ImputeStrategy::mode}});
  EXPECT_DOUBLE_EQ(med.numeric("a").values[1], 3.0);
  EXPECT_FALSE(med.has_missing());
  EXPECT_EQ(std::get<CategoricalColumn>(med.column("c")).label_at(2), "x");

  const auto mean_imp = impute(frame, {{"a", ImputeStrategy::mean}, {"c", ImputeStrategy::missing_as_category}});
  EXPECT_DOUBLE_EQ(mean_imp.numeric("a").values[1], 14.0 / 3.0);
  EXPECT_EQ(std::get<CategoricalColumn>(mean_imp.column("c")).label_at(2), kMissingCategory);

  EXPECT_THROW(impute(frame, {{"a", ImputeStrategy::mode}}), StrategyKindMismatch);
  EXPECT_THROW(impute(frame, {{"zz", ImputeStrategy::mean}}), UnknownFeature);
}

TEST(Rules, RangeAndCategory) {
  Schema schema({{"a", ColumnKind::numeric, ColumnRole::feature, std::pair{0.0, 1.0}, std::nullopt},
                 {"c", ColumnKind::categorical, ColumnRole::feature, std::nullopt,
                  std::vector<std::string>{"x", "y"}}});
  const FeatureFrame frame(std::vector<Column>{make_numeric("a", {0.5, 1.5, -0.1}),
                                               CategoricalColumn::from_labels("c", {"x", "z", "y"})});
  const auto v = validate_rules(frame, schema);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0].row, 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::out_of_range);
  EXPECT_EQ(v[1].kind, ViolationKind::invalid_category);
  EXPECT_EQ(v[1].observed, "z");
  EXPECT_EQ(v[2].row, 2u);
}

TEST(Outliers, ZScore) {
  const auto col = make_numeric("a", {1, 2, 3, 4, 100});
  const auto s = outliers_zscore(col, 1.5);
  const std::vector<double> v{1, 2, 3, 4, 100};
  const double m = 22.0, sd = sample_std(v);
  EXPECT_NEAR(s.scores[4], (100 - m) / sd, 1e-12);
  EXPECT_EQ(s.flagged_count(), 1u);
  EXPECT_TRUE(s.flags[4]);
}

TEST(Outliers, ZScoreConstantColumnWarns) {
  const auto s = outliers_zscore(make_numeric("a", {2, 2, 2}));
  EXPECT_EQ(s.flagged_count(), 0u);
  EXPECT_FALSE(s.warnings.empty());
}

TEST(Outliers, Iqr) {
  // numpy quantile (linear) of {3,1,4,1,5,9,2,6}: q1 = 1.75, q3 = 5.25.
  const auto s = outliers_iqr(make_numeric("a", {3, 1, 4, 1, 5, 9, 2, 6}), 0.5);
  EXPECT_DOUBLE_EQ(s.params.at("q1"), 1.75);
  EXPECT_DOUBLE_EQ(s.params.at("q3"), 5.25);
  EXPECT_NEAR(s.scores[5], 9 - 5.25, 1e-12);
  EXPECT_EQ(s.flagged_count(), 1u);
}

TEST(Outliers, LofMatchesSklearn) {
  const std::vector<std::vector<double>> pts{
      {0.0012, 0.8962},   {-0.2741, -2.6718}, {-0.4547, -2.9749}, {0.0601, 4.0206},   {-0.4922, -1.8614},
      {0.4898, 1.0707},   {0.1054, -2.7914},  {-0.0293, 2.0859},  {-1.3442, -1.3728}, {-1.9012, -3.8686},
      {-1.8417, -0.7053}, {-1.2674, 0.8138},  {0.1568, -0.5608},  {-2.5168, -1.6161}, {-0.0485, 0.3399},
      {-1.5301, -1.4333}, {-0.9785, -2.4265}, {1.0609, -2.4226},  {-0.0325, 2.6532},  {-0.5836, -0.3351},
      {0.1105, 0.1913},   {-1.2251, 0.2284},  {1.3588, -4.6414},  {0.8594, 0.3581},   {-0.6415, 6.0012},
      {0.7623, -3.5979},  {0.0745, 1.7301},   {-0.1888, 2.0487},  {-0.0665, 2.0017},  {1.4385, -2.027}};
  const std::vector<double> expected{
      0.9561344461351148, 1.0341207200121005, 1.0173642660667204, 1.5880871538347248, 1.030221922485484,
      1.0684969702251594, 1.0862697617272759, 0.9501781261119007, 0.9668665040552261, 1.3084009599425483,
      1.1226900505746218, 1.0121742344463727, 1.0841864749390135, 1.2578510771024631, 1.0873013481603222,
      0.929738011356292,  1.0668900432388675, 1.1791692962404632, 1.050687106333727,  0.991979953379636,
      1.0680823100732177, 1.049194475482943,  1.2574527098083048, 1.3249015663025188, 2.8600804648157974,
      1.1357368615935937, 0.9949043430786706, 0.9501781261119007, 0.9644606183100587, 1.2086417483578684};
  Eigen::MatrixXd m(30, 2);
  for (int i = 0; i < 30; ++i) m.row(i) << pts[i][0], pts[i][1];
  const auto s = outliers_lof(m, 5);
  for (int i = 0; i < 30; ++i) EXPECT_NEAR(s.scores[i], expected[i], 1e-9) << "row " << i;
  EXPECT_THROW(outliers_lof(m, 30), InvalidArgument);
}

TEST(Outliers, ChiSquaredQuantile) {
  EXPECT_NEAR(chi_squared_quantile(0.99, 3), 11.344866730144373, 1e-9);
  EXPECT_NEAR(chi_squared_quantile(0.95, 1), 3.841458820694124, 1e-9);
}

TEST(Outliers, PcaMahalanobisCollinearColumns) {
  Eigen::MatrixXd m(50, 3);
  Rng rng = derive_rng(1, 0);
  for (int i = 0; i < 50; ++i) {
    const double a = standard_normal(rng), b = standard_normal(rng);
    m.row(i) << a, b, a + b;
  }
  const auto s = outliers_pca_mahalanobis(m, 1.0, 0.01);
  EXPECT_EQ(s.params.at("components"), 2.0);
  EXPECT_NEAR(s.threshold, chi_squared_quantile(0.99, 2), 1e-12);
}
