#pragma once

// Concept-drift diagnosis: nearest-neighbour input control, residual
// two-sample tests, sliding windows, paired comparisons and per-segment
// error tracking.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "valmon/data_model.hpp"
#include "valmon/metrics.hpp"
#include "valmon/outcome_analysis.hpp"
#include "valmon/shift_metrics.hpp"

namespace valmon {

enum class MatchMetric { euclidean_standardized, mahalanobis };
const char *to_string(MatchMetric m);
MatchMetric parse_match_metric(std::string_view text);

struct MatchResult {
  std::size_t k = 1;
  /// Row-major n_new x k; entry [i * k + j] is the j-th nearest dev row of new row i.
  std::vector<std::size_t> matched_dev_indices;
  std::vector<double> distances;
  double mean_match_distance = 0.0;
  MatchMetric distance_metric = MatchMetric::euclidean_standardized;
};

/// Matches on the numeric features shared by both frames. Ties go to the
/// lower dev index; dev rows may be matched any number of times.
MatchResult nn_match(const FeatureFrame &new_rows, const FeatureFrame &dev, std::size_t k = 1,
                     MatchMetric metric = MatchMetric::euclidean_standardized);

enum class ResidualTest { ks, cvm };
const char *to_string(ResidualTest t);
ResidualTest parse_residual_test(std::string_view text);

struct TwoSampleResult {
  std::string test_name;
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Cramer-von Mises T from pooled mid-ranks.
double cvm_statistic(std::span<const double> x, std::span<const double> y);
/// Asymptotic p-value of T for sample sizes n, m.
double cvm_pvalue(double statistic, std::size_t n, std::size_t m);
/// Limiting CDF of the one-sample statistic.
double cvm_limit_cdf(double x);

TwoSampleResult residual_two_sample_test(const Residuals &res_new, const Residuals &res_matched, ResidualTest test);

enum class DriftVerdict { no_drift, input_drift, concept_drift, both };
const char *to_string(DriftVerdict v);

struct ConceptDriftConfig {
  DriftConfig drift;
  std::size_t k = 1;
  MatchMetric match_metric = MatchMetric::euclidean_standardized;
  ResidualTest test = ResidualTest::ks;
  double p_threshold = 0.01;
};

struct DriftDiagnosis {
  DriftVerdict verdict = DriftVerdict::no_drift;
  bool input_drift = false;
  std::vector<DriftResult> input_drift_evidence;
  TwoSampleResult residual_test;
  double mean_match_distance = 0.0;
  std::size_t distinct_matched_rows = 0;
  std::vector<std::string> notes;
};

/// Input drift means at least one drift_scan result at fail. The residual
/// test compares new residuals against the matched reference residuals.
/// `input_evidence` reuses an existing drift_scan instead of running one.
DriftDiagnosis classify_drift(const ScoredDataset &reference, const ScoredDataset &current,
                              const ConceptDriftConfig &config = {},
                              const std::vector<DriftResult> *input_evidence = nullptr);

enum class WindowUnit { rows, time };
const char *to_string(WindowUnit u);

struct WindowSpec {
  WindowUnit unit = WindowUnit::rows;
  double window = 0.0;
  double step = 0.0;
};

struct WindowPoint {
  double window_start = 0.0;
  double window_end = 0.0;
  std::string start_label;
  std::size_t rows = 0;
  std::optional<double> value;
};

/// Seconds since the Unix epoch for "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS[.fff]][Z]"
/// (a space may replace T); plain numbers are taken as-is.
std::optional<double> parse_timestamp_seconds(const std::string &text);

/// Windows are [start, start + window) and advance by step; the first window
/// reaching the end of the data is closed on the right and is the last one.
/// Row windows follow timestamp order (file order when there are none).
std::vector<WindowPoint> sliding_window_eval(const ScoredDataset &ds, const WindowSpec &spec, ErrorMetric metric,
                                             std::size_t min_rows = 30);

enum class Better { a, b, tie };
const char *to_string(Better b);

struct PairedComparison {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  Better better = Better::tie;
  bool degenerate = false;
};

/// Paired t-test on a - b (lower errors are better).
PairedComparison paired_model_comparison(std::span<const double> errors_a, std::span<const double> errors_b,
                                         double alpha = 0.05);

struct SegmentErrorSeries {
  ErrorMetric metric = ErrorMetric::mae;
  std::vector<std::string> labels;
  /// [segment][batch]
  std::vector<std::vector<std::optional<double>>> values;
  std::vector<std::vector<std::size_t>> rows;
  /// Value divided by the segment's first available value.
  std::vector<std::vector<std::optional<double>>> ratio_to_first;
};

SegmentErrorSeries segment_error_tracking(const std::vector<ScoredDataset> &batches, const std::string &feature,
                                          const BinSpec &bins, ErrorMetric metric, std::size_t min_rows = 30);

}  // namespace valmon
