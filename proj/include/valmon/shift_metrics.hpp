#pragma once

// Distribution-shift statistics: CDF-based (KS, Wasserstein-1), binned PMF
// divergences (KL, JSD, PSI, TVD), multivariate energy distance / MMD /
// Mahalanobis / PCA reconstruction, permutation calibration, and the
// per-feature drift scan.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "valmon/data_model.hpp"
#include "valmon/linalg.hpp"
#include "valmon/stats.hpp"

namespace valmon {

// ---------------------------------------------------------------------------
// Univariate

class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::span<const double> sample);

  std::size_t n() const noexcept { return sorted_.size(); }
  const std::vector<double> &sorted_values() const noexcept { return sorted_; }
  /// Fraction of the sample <= x.
  double cdf(double x) const;

 private:
  std::vector<double> sorted_;
};

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov: exact sup over pooled points, asymptotic
/// p-value with effective size nm/(n+m).
KsResult ks_two_sample(std::span<const double> x, std::span<const double> y);

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

/// Area between the two empirical CDFs.
double wasserstein1(std::span<const double> x, std::span<const double> y);

/// Reference (p) and current (q) PMFs over shared bins. `p` and `q` are the
/// raw relative frequencies; divergences that need strictly positive mass use
/// `smoothed_p()` / `smoothed_q()`.
struct HistogramPair {
  std::vector<double> bin_edges;        // empty for categorical tables
  std::vector<std::string> categories;  // empty for numeric bins
  std::vector<double> p;
  std::vector<double> q;
  double smoothing_epsilon = 1e-6;
  bool degenerate_range = false;

  std::vector<double> smoothed_p() const;
  std::vector<double> smoothed_q() const;
};

HistogramPair make_histogram_pair(std::span<const double> x, std::span<const double> y, std::size_t bins = 10,
                                  double epsilon = 1e-6);
HistogramPair make_histogram_pair(std::span<const double> x, std::span<const double> y,
                                  std::span<const double> edges, double epsilon = 1e-6);
/// Frequency tables over the union of observed labels (reference order
/// first, then labels first seen in the current sample).
HistogramPair make_category_pair(const CategoricalColumn &reference, const CategoricalColumn &current,
                                 double epsilon = 1e-6);

/// Direct formulas on PMFs. KL in nats, JSD in bits, PSI = sum (p-q) ln(p/q).
double kl_divergence(std::span<const double> p, std::span<const double> q);
double jsd(std::span<const double> p, std::span<const double> q);
double psi(std::span<const double> p, std::span<const double> q);
double tvd(std::span<const double> p, std::span<const double> q);

/// Histogram overloads: KL/JSD/PSI on the smoothed PMFs, TVD on the raw ones.
double kl_divergence(const HistogramPair &h);
double jsd(const HistogramPair &h);
double psi(const HistogramPair &h);
double tvd(const HistogramPair &h);

// ---------------------------------------------------------------------------
// Multivariate

namespace detail {

template <typename DX, typename DY>
void check_same_width(const Eigen::MatrixBase<DX> &x, const Eigen::MatrixBase<DY> &y) {
  if (x.cols() != y.cols())
    throw DimensionMismatch("samples have " + std::to_string(x.cols()) + " and " + std::to_string(y.cols()) +
                            " columns");
  if (x.rows() == 0 || y.rows() == 0) throw EmptySample("multivariate sample is empty");
}

/// Mean of f(||a_i - b_j||) over all ordered pairs, fixed summation order.
template <typename DA, typename DB, typename F>
double mean_pair(const Eigen::MatrixBase<DA> &a, const Eigen::MatrixBase<DB> &b, F &&f) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < b.rows(); ++j) row += f(static_cast<double>((a.row(i) - b.row(j)).norm()));
    total += row;
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace detail

/// V-statistic energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| (self pairs
/// included in the within terms).
template <typename DX, typename DY>
double energy_distance(const Eigen::MatrixBase<DX> &x, const Eigen::MatrixBase<DY> &y) {
  detail::check_same_width(x, y);
  auto id = [](double d) { return d; };
  const double xy = detail::mean_pair(x, y, id);
  const double yx = detail::mean_pair(y, x, id);
  const double xx = detail::mean_pair(x, x, id);
  const double yy = detail::mean_pair(y, y, id);
  // (xy + yx) keeps the estimator exactly symmetric in its arguments.
  return std::max(0.0, (xy + yx) - (xx + yy));
}

/// All pairwise Euclidean distances of the stacked rows.
template <typename Derived>
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixBase<Derived> &z) {
  const auto n = z.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = static_cast<double>((z.row(i) - z.row(j)).norm());
  return d;
}

/// Median of pooled pairwise distances (i < j). Falls back to the median of
/// the nonzero distances when more than half the pairs coincide; returns 0
/// only when every point is identical.
double median_heuristic_from_distances(const Eigen::MatrixXd &pooled_distances);

template <typename DX, typename DY>
double median_heuristic_bandwidth(const Eigen::MatrixBase<DX> &x, const Eigen::MatrixBase<DY> &y) {
  detail::check_same_width(x, y);
  Eigen::MatrixXd pooled(x.rows() + y.rows(), x.cols());
  pooled << x.template cast<double>(), y.template cast<double>();
  return median_heuristic_from_distances(pairwise_distances(pooled));
}

struct MmdOptions {
  /// Gaussian kernel sigma; median heuristic when unset.
  std::optional<double> bandwidth;
  bool unbiased = false;
};

/// Squared MMD with kernel exp(-|a-b|^2 / (2 sigma^2)).
template <typename DX, typename DY>
double mmd2(const Eigen::MatrixBase<DX> &x, const Eigen::MatrixBase<DY> &y, const MmdOptions &options = {}) {
  detail::check_same_width(x, y);
  const double sigma = options.bandwidth ? *options.bandwidth : median_heuristic_bandwidth(x, y);
  if (!(sigma > 0.0)) return 0.0;
  const double gamma = 1.0 / (2.0 * sigma * sigma);
  auto kernel = [gamma](double d) { return std::exp(-gamma * d * d); };
  const double n = static_cast<double>(x.rows());
  const double m = static_cast<double>(y.rows());
  const double xy = detail::mean_pair(x, y, kernel);
  const double yx = detail::mean_pair(y, x, kernel);
  double xx = detail::mean_pair(x, x, kernel);
  double yy = detail::mean_pair(y, y, kernel);
  if (options.unbiased) {
    if (x.rows() < 2 || y.rows() < 2) throw TooFewRows("unbiased MMD needs at least two rows per sample");
    // Drop the diagonal (k(a,a) = 1) from the within-sample means.
    xx = (xx * n * n - n) / (n * (n - 1.0));
    yy = (yy * m * m - m) / (m * (m - 1.0));
    return xx + yy - (xy + yx);
  }
  return std::max(0.0, xx + yy - (xy + yx));
}

struct MahalanobisResult {
  double distance = 0.0;
  bool pseudo_inverse = false;
};

/// sqrt((x-mu)^T (Sigma + lambda I)^{-1} (x-mu)) with lambda = 1e-6 trace/d.
/// Falls back to a pseudo-inverse (and flags it) when the ridged matrix is
/// still not positive definite.
template <typename DP, typename DM, typename DC>
MahalanobisResult mahalanobis(const Eigen::MatrixBase<DP> &point, const Eigen::MatrixBase<DM> &mean,
                              const Eigen::MatrixBase<DC> &covariance) {
  const auto d = covariance.rows();
  if (covariance.cols() != d || point.size() != d || mean.size() != d)
    throw DimensionMismatch("mahalanobis: inconsistent dimensions");
  Eigen::VectorXd diff(d);
  for (Eigen::Index i = 0; i < d; ++i) diff(i) = static_cast<double>(point(i)) - static_cast<double>(mean(i));
  Eigen::MatrixXd ridged = covariance.template cast<double>();
  const double lambda = d > 0 ? 1e-6 * ridged.trace() / static_cast<double>(d) : 0.0;
  ridged.diagonal().array() += lambda;

  MahalanobisResult out;
  Eigen::LLT<Eigen::MatrixXd> llt(ridged);
  if (llt.info() == Eigen::Success && lambda > 0.0) {
    out.distance = std::sqrt(std::max(0.0, diff.dot(llt.solve(diff))));
    return out;
  }
  out.pseudo_inverse = true;
  const Eigen::MatrixXd pinv = ridged.completeOrthogonalDecomposition().pseudoInverse();
  out.distance = std::sqrt(std::max(0.0, diff.dot(pinv * diff)));
  return out;
}

enum class PermutationMetric { energy, mmd2 };

struct PermutationResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double bandwidth = 0.0;  // MMD only
};

/// Permutation test on the pooled sample: p = (1 + #{perm >= observed}) /
/// (B + 1). Requires at least 99 permutations; deterministic given the seed.
PermutationResult permutation_test(PermutationMetric metric, const Eigen::MatrixXd &x, const Eigen::MatrixXd &y,
                                   std::size_t n_permutations, std::uint64_t seed, const MmdOptions &options = {});

inline double permutation_pvalue(PermutationMetric metric, const Eigen::MatrixXd &x, const Eigen::MatrixXd &y,
                                 std::size_t n_permutations, std::uint64_t seed, const MmdOptions &options = {}) {
  return permutation_test(metric, x, y, n_permutations, seed, options).p_value;
}

// ---------------------------------------------------------------------------
// Drift scan

enum class Verdict { pass, warn, fail };
const char *to_string(Verdict v);
Verdict worst(Verdict a, Verdict b);

/// warn/fail cut-offs. For increasing-badness statistics a value above the
/// cut-off trips it; for p-values (`lower_is_worse`) a value below it does.
struct Threshold {
  double warn = 0.0;
  double fail = 0.0;
  bool lower_is_worse = false;

  Verdict judge(double value) const;
};

struct DriftResult {
  std::optional<std::string> feature;
  std::string metric;
  double statistic = 0.0;
  std::optional<double> p_value;
  Verdict verdict = Verdict::pass;
  std::optional<Threshold> thresholds;
};

struct DriftConfig {
  std::size_t bins = 10;
  double epsilon = 1e-6;
  std::vector<std::string> numeric_metrics{"ks", "psi", "jsd", "wasserstein1"};
  std::vector<std::string> categorical_metrics{"psi", "jsd", "tvd"};
  std::vector<std::string> multivariate_metrics{"energy", "mmd2", "pca_recon"};
  std::size_t permutations = 199;
  /// Rows per side fed to the O(n^2) multivariate tests (seeded subsample).
  std::size_t multivariate_max_rows = 1000;
  double variance_fraction = 0.95;
  std::uint64_t seed = 0;
  /// Keyed by metric name. The value judged is the p-value for ks, energy
  /// and mmd2; the current/reference ratio for pca_recon; the statistic
  /// otherwise.
  std::map<std::string, Threshold> thresholds = default_thresholds();

  static std::map<std::string, Threshold> default_thresholds() {
    return {{"psi", {0.1, 0.25, false}}, {"ks", {0.05, 0.01, true}}};
  }
};

/// Metric names accepted per block.
const std::vector<std::string> &univariate_metric_names();
const std::vector<std::string> &multivariate_metric_names();

std::vector<DriftResult> drift_scan(const ScoredDataset &reference, const ScoredDataset &current,
                                    const DriftConfig &config = {});
std::vector<DriftResult> drift_scan(const FeatureFrame &reference, const FeatureFrame &current,
                                    const DriftConfig &config = {});

/// Throws `SchemaMismatch` unless both frames have the same column names and kinds.
void require_same_schema(const FeatureFrame &a, const FeatureFrame &b);

}  // namespace valmon
