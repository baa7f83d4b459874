#pragma once

// Monitoring run configuration: a JSON document naming the schema, the
// datasets and per-section options. Every omitted option takes a default and
// the resolved document is echoed into the report.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "valmon/concept_drift.hpp"
#include "valmon/data_model.hpp"
#include "valmon/data_quality.hpp"
#include "valmon/external_model.hpp"
#include "valmon/outcome_analysis.hpp"
#include "valmon/shift_metrics.hpp"
#include "valmon/uncertainty.hpp"

namespace valmon {

struct DataPaths {
  std::string reference;
  std::string current;
  std::optional<std::string> train;
  std::optional<std::string> calibration;
};

struct QualityConfig {
  /// Judged on each column's missing fraction in the current set.
  std::optional<Threshold> missingness = Threshold{0.05, 0.2, false};
  std::vector<OutlierMethod> outlier_methods{OutlierMethod::zscore, OutlierMethod::iqr};
  double z_threshold = 3.0;
  double iqr_multiplier = 1.5;
  std::size_t lof_k = 20;
  double lof_threshold = 1.5;
  double pca_variance_fraction = 0.95;
  double pca_alpha = 0.01;
  /// Judged on the flagged fraction per outlier result.
  std::optional<Threshold> outlier_rate;
  /// Judged on the fraction of rows with at least one rule violation.
  std::optional<Threshold> violation_rate;
};

struct PerformanceConfig {
  std::optional<ErrorMetric> metric;
  /// Judged on current/reference error (reference/current for auc).
  std::optional<Threshold> ratio = Threshold{1.25, 1.5, false};
};

struct UncertaintyConfig {
  double alpha = 0.1;
  ConformalMode mode = ConformalMode::absolute_residual;
  std::size_t reliability_bins = 10;
  /// Judged on (1 - alpha) - empirical coverage.
  std::optional<Threshold> coverage_gap;
};

struct WeaknessConfig {
  std::vector<std::string> features;
  std::size_t bins = 5;
  std::size_t min_rows = 30;
  std::optional<ErrorMetric> metric;
  std::optional<std::size_t> kmeans_k;
  std::size_t kmeans_max_iter = 100;
  /// Judged on the lift of each reported region.
  std::optional<Threshold> lift;
  std::optional<std::string> fit_gap_feature;
  FitGapThresholds fit_gap;
};

struct RobustnessConfig {
  std::optional<ExternalModelSpec> model;
  double noise_fraction = 0.05;
  std::size_t n_repeats = 5;
  std::vector<std::string> irrelevant_features;
  InvarianceMode invariance_mode = InvarianceMode::permute;
  double tolerance = 1e-9;
};

struct MonitorConfig {
  std::filesystem::path base_dir;
  nlohmann::json schema_document;
  Schema schema;
  DataPaths data;
  std::set<std::string> missing_tokens = default_missing_tokens();
  std::uint64_t seed = 0;
  std::optional<std::string> timestamp;
  std::optional<std::string> run_id;

  QualityConfig quality;
  DriftConfig drift;
  bool concept_enabled = true;
  ConceptDriftConfig concept_drift;
  PerformanceConfig performance;
  UncertaintyConfig uncertainty;
  WeaknessConfig weakness;
  RobustnessConfig robustness;

  /// Data paths resolved against the config file's directory.
  std::filesystem::path resolve(const std::string &path) const;
  /// Propagates `seed` into the sections that draw random numbers.
  void set_seed(std::uint64_t value);
};

/// Throws `ConfigError` carrying a JSON pointer to the offending key.
MonitorConfig parse_config(const std::string &path);
MonitorConfig parse_config(const nlohmann::json &document, const std::filesystem::path &base_dir);

Schema parse_schema(const nlohmann::json &document, const std::string &pointer = "");

/// Resolved configuration with every default filled in.
nlohmann::json config_to_json(const MonitorConfig &config);
nlohmann::json schema_to_json(const Schema &schema);
nlohmann::json threshold_to_json(const std::optional<Threshold> &threshold);

}  // namespace valmon
