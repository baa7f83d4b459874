#pragma once

// Error metrics shared by segment analysis, drift tracking and monitoring.

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "valmon/data_model.hpp"

namespace valmon {

enum class ErrorMetric { mae, rmse, error_rate, auc };

const char *to_string(ErrorMetric m);
ErrorMetric parse_error_metric(std::string_view text);

/// True when every value is exactly 0 or 1.
bool is_binary(std::span<const double> values);

/// MAE for continuous predictions; error rate at 0.5 when the target is
/// binary and predictions are probabilities.
ErrorMetric default_metric(const ScoredDataset &ds);

/// Throws `MetricIncompatible` when error_rate/auc is asked of a non-binary target.
void require_compatible(ErrorMetric metric, std::span<const double> y_true);

/// Absent for an empty sample, and for AUC when only one class is present.
std::optional<double> evaluate_metric(ErrorMetric metric, std::span<const double> y_true,
                                      std::span<const double> y_pred, double threshold = 0.5);

/// Rank-based AUC (Mann-Whitney, ties count one half).
std::optional<double> auc(std::span<const double> y_true, std::span<const double> scores);

/// Per-row error used by paired comparisons: |r| for mae/rmse-style, 0/1
/// misclassification for error_rate.
double row_error(ErrorMetric metric, double y_true, double y_pred, double threshold = 0.5);

}  // namespace valmon
