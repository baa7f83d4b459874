#pragma once

// Split conformal prediction, conformalized quantile regression, coverage,
// Brier score and reliability tables.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "valmon/data_model.hpp"

namespace valmon {

enum class ConformalMode { absolute_residual, cqr };
const char *to_string(ConformalMode m);

struct ConformalCalibration {
  double alpha = 0.1;
  double q_hat = 0.0;
  std::size_t n_calibration = 0;
  ConformalMode mode = ConformalMode::absolute_residual;
};

/// Rank used for the calibrated quantile: ceil((n + 1)(1 - alpha)).
std::size_t conformal_rank(std::size_t n, double alpha);

/// q_hat = k-th smallest score; throws `InsufficientCalibration` when k > n.
ConformalCalibration conformal_from_scores(std::span<const double> scores, double alpha, ConformalMode mode);

/// Scores |y_true - y_pred|. The calibration rows must not have been used
/// to train the model.
ConformalCalibration conformal_fit(const ScoredDataset &calibration, double alpha);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// [y_pred - q_hat, y_pred + q_hat]; absolute-residual calibrations only.
Interval conformal_interval(const ConformalCalibration &cal, double y_pred);

/// Scores max(lower - y, y - upper); q_hat may be negative.
ConformalCalibration cqr_fit(const ScoredDataset &calibration, double alpha);

/// [lower - q_hat, upper + q_hat]; CQR calibrations only.
Interval cqr_interval(const ConformalCalibration &cal, double y_pred_lower, double y_pred_upper);

std::vector<double> cqr_scores(std::span<const double> y_true, std::span<const double> lower,
                               std::span<const double> upper);

double empirical_coverage(std::span<const Interval> intervals, std::span<const double> y_true);

/// Mean squared difference; probabilities in [0,1], outcomes in {0,1}.
double brier_score(std::span<const double> probabilities, std::span<const double> outcomes);

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_predicted;
  std::optional<double> observed_rate;
};

struct ReliabilityTable {
  std::vector<ReliabilityBin> bins;
};

/// Equal-width bins on [0,1]; the last bin is closed on the right. Empty
/// bins are kept with absent rates.
ReliabilityTable reliability_table(std::span<const double> probabilities, std::span<const double> outcomes,
                                   std::size_t n_bins = 10);

}  // namespace valmon
