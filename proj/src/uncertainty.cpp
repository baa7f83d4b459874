#include "valmon/uncertainty.hpp"

#include <algorithm>
#include <cmath>

namespace valmon {

const char *to_string(ConformalMode m) { return m == ConformalMode::cqr ? "cqr" : "absolute_residual"; }

std::size_t conformal_rank(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const double raw = static_cast<double>(n + 1) * (1.0 - alpha);
  // Guard against 4.000000000000001 style products rounding up a whole rank.
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

ConformalCalibration conformal_from_scores(std::span<const double> scores, double alpha, ConformalMode mode) {
  const std::size_t n = scores.size();
  const std::size_t k = conformal_rank(n, alpha);
  if (k > n || k == 0)
    throw InsufficientCalibration("need rank " + std::to_string(k) + " of " + std::to_string(n) +
                                  " calibration scores at alpha=" + format_number(alpha));
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return {alpha, sorted[k - 1], n, mode};
}

ConformalCalibration conformal_fit(const ScoredDataset &calibration, double alpha) {
  std::vector<double> scores(calibration.n_rows());
  for (std::size_t i = 0; i < scores.size(); ++i)
    scores[i] = std::abs(calibration.y_true()[i] - calibration.y_pred()[i]);
  return conformal_from_scores(scores, alpha, ConformalMode::absolute_residual);
}

Interval conformal_interval(const ConformalCalibration &cal, double y_pred) {
  if (cal.mode != ConformalMode::absolute_residual)
    throw ModeMismatch("conformal_interval needs an absolute-residual calibration");
  return {y_pred - cal.q_hat, y_pred + cal.q_hat};
}

std::vector<double> cqr_scores(std::span<const double> y_true, std::span<const double> lower,
                               std::span<const double> upper) {
  if (y_true.size() != lower.size() || y_true.size() != upper.size())
    throw LengthMismatch("CQR inputs differ in length");
  std::vector<double> s(y_true.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::max(lower[i] - y_true[i], y_true[i] - upper[i]);
  return s;
}

ConformalCalibration cqr_fit(const ScoredDataset &calibration, double alpha) {
  if (!calibration.y_pred_lower() || !calibration.y_pred_upper())
    throw MissingQuantileColumns("CQR needs y_pred_lower and y_pred_upper");
  const auto s = cqr_scores(calibration.y_true(), *calibration.y_pred_lower(), *calibration.y_pred_upper());
  return conformal_from_scores(s, alpha, ConformalMode::cqr);
}

Interval cqr_interval(const ConformalCalibration &cal, double y_pred_lower, double y_pred_upper) {
  if (cal.mode != ConformalMode::cqr) throw ModeMismatch("cqr_interval needs a CQR calibration");
  return {y_pred_lower - cal.q_hat, y_pred_upper + cal.q_hat};
}

double empirical_coverage(std::span<const Interval> intervals, std::span<const double> y_true) {
  if (intervals.size() != y_true.size()) throw LengthMismatch("intervals and outcomes differ in length");
  if (intervals.empty()) throw EmptySample("coverage of an empty sample");
  std::size_t inside = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i)
    if (intervals[i].lower <= y_true[i] && y_true[i] <= intervals[i].upper) ++inside;
  return static_cast<double>(inside) / static_cast<double>(intervals.size());
}

namespace {

void check_probabilities(std::span<const double> probabilities, std::span<const double> outcomes) {
  if (probabilities.size() != outcomes.size()) throw LengthMismatch("probabilities and outcomes differ in length");
  for (double p : probabilities)
    if (!(p >= 0.0 && p <= 1.0)) throw RangeError("probability " + format_number(p) + " outside [0,1]");
  for (double o : outcomes)
    if (o != 0.0 && o != 1.0) throw RangeError("outcome " + format_number(o) + " is not 0 or 1");
}

}  // namespace

double brier_score(std::span<const double> probabilities, std::span<const double> outcomes) {
  check_probabilities(probabilities, outcomes);
  if (probabilities.empty()) throw EmptySample("Brier score of an empty sample");
  double sum = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double d = probabilities[i] - outcomes[i];
    sum += d * d;
  }
  return sum / static_cast<double>(probabilities.size());
}

ReliabilityTable reliability_table(std::span<const double> probabilities, std::span<const double> outcomes,
                                   std::size_t n_bins) {
  if (n_bins < 2) throw InvalidArgument("reliability table needs at least two bins");
  check_probabilities(probabilities, outcomes);
  ReliabilityTable table;
  table.bins.resize(n_bins);
  std::vector<double> sum_p(n_bins, 0.0), sum_y(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    table.bins[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
    table.bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
  }
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const auto b = std::min(n_bins - 1, static_cast<std::size_t>(probabilities[i] * static_cast<double>(n_bins)));
    ++table.bins[b].count;
    sum_p[b] += probabilities[i];
    sum_y[b] += outcomes[i];
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto &bin = table.bins[b];
    if (bin.count == 0) continue;
    bin.mean_predicted = sum_p[b] / static_cast<double>(bin.count);
    bin.observed_rate = sum_y[b] / static_cast<double>(bin.count);
  }
  return table;
}

}  // namespace valmon
