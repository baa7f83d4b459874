#pragma once

#include <map>
#include <string>
#include <vector>

#include "valmon/data_model.hpp"

namespace valmon {

struct ColumnMissingness {
  std::string column;
  std::size_t missing_count = 0;
  double missing_fraction = 0.0;
};

struct MissingnessProfile {
  std::vector<ColumnMissingness> columns;
  double row_complete_fraction = 1.0;
};

MissingnessProfile profile_missingness(const FeatureFrame &frame);

enum class ImputeStrategy { mean, median, mode, missing_as_category };

const char *to_string(ImputeStrategy s);
ImputeStrategy parse_impute_strategy(std::string_view text);

/// Label used for the synthetic "missing" category.
inline constexpr const char *kMissingCategory = "__MISSING__";

/// Fills the listed columns from their observed values only; untreated
/// columns are copied unchanged.
FeatureFrame impute(const FeatureFrame &frame, const std::map<std::string, ImputeStrategy> &strategies);

enum class ViolationKind { out_of_range, invalid_category, wrong_type };
const char *to_string(ViolationKind kind);

struct RuleViolation {
  std::size_t row = 0;
  std::string column;
  ViolationKind kind = ViolationKind::out_of_range;
  std::string observed;
};

/// One violation per offending observed cell; missing cells never violate.
std::vector<RuleViolation> validate_rules(const FeatureFrame &frame, const Schema &schema);

enum class OutlierMethod { zscore, iqr, lof, pca_mahalanobis };
const char *to_string(OutlierMethod m);

/// Per-row scores and flags. For every method `flags[i] == scores[i] > threshold`;
/// rows that could not be scored (missing) carry NaN and are never flagged.
struct OutlierScoreSet {
  OutlierMethod method = OutlierMethod::zscore;
  std::vector<double> scores;
  std::vector<bool> flags;
  double threshold = 0.0;
  std::map<std::string, double> params;
  std::vector<std::string> warnings;

  std::size_t flagged_count() const;
};

/// |x - mean| / sample std over observed values. A zero-variance column
/// scores 0 everywhere with a warning instead of failing.
OutlierScoreSet outliers_zscore(const NumericColumn &column, double z_threshold = 3.0);

/// Score = distance outside [Q1, Q3] (type-7 quantiles); flagged when it
/// exceeds multiplier * IQR.
OutlierScoreSet outliers_iqr(const NumericColumn &column, double multiplier = 1.5);

/// Local outlier factor on z-standardized numeric features. Distances are
/// floored at 1e-12 so duplicated points get density ratio 1.
OutlierScoreSet outliers_lof(const FeatureFrame &frame, std::size_t k, double threshold = 1.5);
OutlierScoreSet outliers_lof(const Eigen::MatrixXd &data, std::size_t k, double threshold = 1.5);

/// Squared Mahalanobis distance in the retained PCA space, flagged above the
/// chi-squared (1 - alpha) quantile with one degree of freedom per component.
OutlierScoreSet outliers_pca_mahalanobis(const FeatureFrame &frame, double variance_fraction = 0.95,
                                         double alpha = 0.01);
OutlierScoreSet outliers_pca_mahalanobis(const Eigen::MatrixXd &data, double variance_fraction = 0.95,
                                         double alpha = 0.01);

double chi_squared_quantile(double prob, double dof);

}  // namespace valmon
