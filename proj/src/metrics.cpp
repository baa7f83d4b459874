#include "valmon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace valmon {

const char *to_string(ErrorMetric m) {
  switch (m) {
    case ErrorMetric::mae: return "mae";
    case ErrorMetric::rmse: return "rmse";
    case ErrorMetric::error_rate: return "error_rate";
    case ErrorMetric::auc: return "auc";
  }
  return "mae";
}

ErrorMetric parse_error_metric(std::string_view text) {
  for (auto m : {ErrorMetric::mae, ErrorMetric::rmse, ErrorMetric::error_rate, ErrorMetric::auc})
    if (text == to_string(m)) return m;
  throw InvalidArgument("unknown error metric '" + std::string(text) + "'");
}

bool is_binary(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

ErrorMetric default_metric(const ScoredDataset &ds) {
  const auto &pred = ds.y_pred();
  const bool probabilities = std::all_of(pred.begin(), pred.end(), [](double p) { return p >= 0.0 && p <= 1.0; });
  return is_binary(ds.y_true()) && probabilities ? ErrorMetric::error_rate : ErrorMetric::mae;
}

void require_compatible(ErrorMetric metric, std::span<const double> y_true) {
  if ((metric == ErrorMetric::error_rate || metric == ErrorMetric::auc) && !is_binary(y_true))
    throw MetricIncompatible(std::string(to_string(metric)) + " needs a binary 0/1 target");
}

double row_error(ErrorMetric metric, double y_true, double y_pred, double threshold) {
  switch (metric) {
    case ErrorMetric::error_rate:
    case ErrorMetric::auc:
      return ((y_pred >= threshold) ? 1.0 : 0.0) != y_true ? 1.0 : 0.0;
    case ErrorMetric::rmse:
      return (y_true - y_pred) * (y_true - y_pred);
    case ErrorMetric::mae:
      break;
  }
  return std::abs(y_true - y_pred);
}

std::optional<double> auc(std::span<const double> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size()) throw LengthMismatch("AUC inputs differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positives = 0.0, negatives = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (y_true[order[t]] == 1.0) {
        rank_sum += mid_rank;
        positives += 1.0;
      } else {
        negatives += 1.0;
      }
    }
    i = j;
  }
  if (positives == 0.0 || negatives == 0.0) return std::nullopt;
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

std::optional<double> evaluate_metric(ErrorMetric metric, std::span<const double> y_true,
                                      std::span<const double> y_pred, double threshold) {
  if (y_true.size() != y_pred.size()) throw LengthMismatch("metric inputs differ in length");
  require_compatible(metric, y_true);
  if (y_true.empty()) return std::nullopt;
  if (metric == ErrorMetric::auc) return auc(y_true, y_pred);
  double sum = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) sum += row_error(metric, y_true[i], y_pred[i], threshold);
  const double avg = sum / static_cast<double>(y_true.size());
  return metric == ErrorMetric::rmse ? std::sqrt(avg) : avg;
}

}  // namespace valmon
