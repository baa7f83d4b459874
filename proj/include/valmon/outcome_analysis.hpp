#pragma once

// Segment-level weakness analysis (binning, k-means, lift tables, weak
// region scans, fit gaps) and robustness probes against a scoring model.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "valmon/data_model.hpp"
#include "valmon/metrics.hpp"
#include "valmon/model.hpp"

namespace valmon {

enum class SegmentSource { binned, kmeans };
const char *to_string(SegmentSource s);

inline constexpr const char *kMissingSegment = "missing";

struct SegmentAssignment {
  std::vector<int> segment_ids;
  std::vector<std::string> labels;
  SegmentSource source = SegmentSource::binned;

  std::size_t n_segments() const noexcept { return labels.size(); }
  /// Row indices per segment id.
  std::vector<std::vector<std::size_t>> members() const;
};

/// Explicit ascending edges, or a quantile count (edges from type-7 quantiles).
struct BinSpec {
  std::vector<double> edges;
  std::size_t quantiles = 0;

  static BinSpec explicit_edges(std::vector<double> e) { return {std::move(e), 0}; }
  static BinSpec quantile(std::size_t count) { return {{}, count}; }
};

/// Edges a spec resolves to on the observed values (deduplicated).
std::vector<double> resolve_edges(const NumericColumn &column, const BinSpec &spec);

/// Bins are [a, b) except the last, [a, b]. Values below the first edge or
/// above the last land in "< a" / "> b" segments; missing values in
/// "missing". Segments are only created for occupied out-of-range/missing
/// cells; range segments always exist.
SegmentAssignment segment_by_bins(const FeatureFrame &frame, const std::string &feature, const BinSpec &spec);
SegmentAssignment segment_by_edges(const NumericColumn &column, std::span<const double> edges);

struct KMeansResult {
  SegmentAssignment assignment;
  Eigen::MatrixXd centroids;  // k x d, original units
  double inertia = 0.0;       // standardized units
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> inertia_history;
};

/// k-means++ seeding and Lloyd iterations on z-standardized numeric columns.
KMeansResult kmeans(const FeatureFrame &frame, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100);
KMeansResult kmeans(const Eigen::MatrixXd &data, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100);

struct SegmentMetricRow {
  int segment_id = 0;
  std::string label;
  std::size_t rows = 0;
  std::optional<double> value;
  std::optional<double> lift;
  bool degenerate = false;
};

struct SegmentMetricsTable {
  ErrorMetric metric = ErrorMetric::mae;
  std::optional<double> overall;
  std::vector<SegmentMetricRow> rows;
};

/// Lift = segment / overall. Both zero gives 1 marked degenerate; a zero
/// overall under a nonzero segment throws `InvalidArgument`.
SegmentMetricsTable segment_metrics(const ScoredDataset &ds, const SegmentAssignment &seg, ErrorMetric metric,
                                    double threshold = 0.5);

struct WeakRegion {
  std::string feature;
  std::string range;
  std::size_t rows = 0;
  double metric = 0.0;
  double lift = 0.0;
};

struct WeakRegionOptions {
  std::size_t bins = 5;
  std::size_t min_rows = 30;
  std::optional<ErrorMetric> metric;
};

/// Quantile-binned regions per feature ranked by lift, then rows, then name.
std::vector<WeakRegion> weak_region_scan(const ScoredDataset &ds, const std::vector<std::string> &features,
                                         const WeakRegionOptions &options = {});

enum class FitFlag { ok, overfit, underfit };
const char *to_string(FitFlag f);

struct FitGapThresholds {
  double overfit_fraction = 0.2;
  double underfit_multiplier = 1.5;
};

struct FitGapRow {
  std::string segment;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::optional<double> train_metric;
  std::optional<double> test_metric;
  std::optional<double> gap;
  FitFlag flag = FitFlag::ok;
};

struct FitGapBasis {
  std::string feature;
  BinSpec bins;
};

struct FitGapReport {
  ErrorMetric metric = ErrorMetric::mae;
  std::optional<double> overall_train;
  std::optional<double> overall_test;
  FitGapThresholds thresholds;
  std::vector<FitGapRow> rows;
};

/// Without a basis a single "all" segment is compared. Quantile edges are
/// taken from the training set and applied to both.
FitGapReport fit_gap(const ScoredDataset &train, const ScoredDataset &test, const std::optional<FitGapBasis> &basis,
                     std::optional<ErrorMetric> metric = std::nullopt, const FitGapThresholds &thresholds = {});

struct FeatureSensitivity {
  std::string feature;
  double noise_scale = 0.0;
  double noise_std = 0.0;
  double mean_abs_prediction_delta = 0.0;
  double p95_abs_delta = 0.0;
};

struct SensitivityReport {
  std::size_t n_repeats = 0;
  std::vector<FeatureSensitivity> features;
};

/// Gaussian noise of std noise_fraction * feature std per numeric feature,
/// one feature at a time. Missing cells stay missing.
SensitivityReport perturbation_test(const Model &model, const FeatureFrame &frame, double noise_fraction = 0.05,
                                    std::size_t n_repeats = 5, std::uint64_t seed = 0);

enum class InvarianceMode { permute, constant };
const char *to_string(InvarianceMode m);
InvarianceMode parse_invariance_mode(std::string_view text);

struct InvarianceReport {
  InvarianceMode mode = InvarianceMode::permute;
  std::vector<std::string> features;
  double tolerance = 1e-9;
  double max_abs_delta = 0.0;
  double mean_abs_delta = 0.0;
  std::vector<std::size_t> violating_rows;
};

InvarianceReport invariance_test(const Model &model, const FeatureFrame &frame,
                                 const std::vector<std::string> &irrelevant, InvarianceMode mode,
                                 std::uint64_t seed = 0, double tolerance = 1e-9);

}  // namespace valmon
