#pragma once

// Core immutable tables: schema, feature frames, scored datasets, plus CSV
// ingestion and deterministic splitting.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "valmon/error.hpp"

namespace valmon {

enum class ColumnKind { numeric, categorical };

enum class ColumnRole {
  feature,
  target,
  prediction,
  prediction_lower,
  prediction_upper,
  timestamp,
  split_tag,
};

const char *to_string(ColumnKind kind);
const char *to_string(ColumnRole role);
ColumnKind parse_column_kind(std::string_view text);
ColumnRole parse_column_role(std::string_view text);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  ColumnRole role = ColumnRole::feature;
  std::optional<std::pair<double, double>> valid_range;
  std::optional<std::vector<std::string>> valid_categories;
};

class Schema {
 public:
  Schema() = default;
  /// Throws `SchemaError` on duplicate names, more than one column per
  /// non-feature role, or range/category constraints on the wrong kind.
  explicit Schema(std::vector<ColumnSpec> columns);

  const std::vector<ColumnSpec> &columns() const noexcept { return columns_; }
  const ColumnSpec *find(std::string_view name) const;
  const ColumnSpec *with_role(ColumnRole role) const;
  std::vector<const ColumnSpec *> features() const;

 private:
  std::vector<ColumnSpec> columns_;
};

struct NumericColumn {
  std::string name;
  std::vector<double> values;
  std::vector<bool> missing;

  std::size_t size() const noexcept { return values.size(); }
  bool is_missing(std::size_t row) const { return missing[row]; }
  /// Observed (non-missing) values in row order.
  std::vector<double> observed() const;
};

/// Integer codes into `labels`; labels are kept in first-appearance order.
/// Missing cells carry code -1.
struct CategoricalColumn {
  std::string name;
  std::vector<int> codes;
  std::vector<std::string> labels;
  std::vector<bool> missing;

  std::size_t size() const noexcept { return codes.size(); }
  bool is_missing(std::size_t row) const { return missing[row]; }
  const std::string &label_at(std::size_t row) const { return labels.at(static_cast<std::size_t>(codes[row])); }
  std::size_t observed_count() const;

  /// Builds a column from raw labels; `std::nullopt` entries are missing.
  static CategoricalColumn from_labels(std::string name,
                                       const std::vector<std::optional<std::string>> &cells);
};

using Column = std::variant<NumericColumn, CategoricalColumn>;

const std::string &column_name(const Column &column);
std::size_t column_size(const Column &column);
bool column_missing(const Column &column, std::size_t row);

NumericColumn make_numeric(std::string name, std::vector<double> values);

class FeatureFrame {
 public:
  FeatureFrame() = default;
  explicit FeatureFrame(std::vector<Column> columns);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return columns_.size(); }
  const std::vector<Column> &columns() const noexcept { return columns_; }

  const Column *find(std::string_view name) const;
  /// Throws `UnknownFeature` when absent.
  const Column &column(std::string_view name) const;
  const NumericColumn &numeric(std::string_view name) const;

  std::vector<std::string> names() const;
  std::vector<std::string> numeric_names() const;
  bool has_missing() const;

  FeatureFrame select_rows(std::span<const std::size_t> rows) const;
  /// Copy with the same-named column replaced.
  FeatureFrame with_column(Column replacement) const;

 private:
  std::size_t n_rows_ = 0;
  std::vector<Column> columns_;
};

/// Row-major matrix of the named numeric columns. Throws `MissingValues` if
/// any selected cell is missing.
Eigen::MatrixXd numeric_matrix(const FeatureFrame &frame, std::span<const std::string> names);
Eigen::MatrixXd numeric_matrix(const FeatureFrame &frame);

class ScoredDataset {
 public:
  struct Outcomes {
    std::vector<double> y_true;
    std::vector<double> y_pred;
    std::optional<std::vector<double>> y_pred_lower;
    std::optional<std::vector<double>> y_pred_upper;
    std::optional<std::vector<std::string>> timestamps;
    std::optional<std::vector<std::string>> split_tag;
  };

  ScoredDataset() = default;
  ScoredDataset(FeatureFrame frame, Outcomes outcomes);

  std::size_t n_rows() const noexcept { return frame_.n_rows(); }
  const FeatureFrame &frame() const noexcept { return frame_; }
  const std::vector<double> &y_true() const noexcept { return outcomes_.y_true; }
  const std::vector<double> &y_pred() const noexcept { return outcomes_.y_pred; }
  const std::optional<std::vector<double>> &y_pred_lower() const noexcept { return outcomes_.y_pred_lower; }
  const std::optional<std::vector<double>> &y_pred_upper() const noexcept { return outcomes_.y_pred_upper; }
  const std::optional<std::vector<std::string>> &timestamps() const noexcept { return outcomes_.timestamps; }
  const std::optional<std::vector<std::string>> &split_tag() const noexcept { return outcomes_.split_tag; }
  const Outcomes &outcomes() const noexcept { return outcomes_; }

  ScoredDataset select_rows(std::span<const std::size_t> rows) const;

 private:
  FeatureFrame frame_;
  Outcomes outcomes_;
};

struct Residuals {
  std::vector<double> values;
};

/// y_true - y_pred on whatever numeric scale the prediction column carries.
Residuals residuals(const ScoredDataset &ds);

inline const std::set<std::string> &default_missing_tokens() {
  static const std::set<std::string> tokens{"", "NA", "NaN", "null"};
  return tokens;
}

/// Feature columns only; target/prediction/etc. columns are ignored.
FeatureFrame parse_frame_csv(std::string_view text, const Schema &schema,
                             const std::set<std::string> &missing_tokens = default_missing_tokens());
FeatureFrame load_frame_csv(const std::string &path, const Schema &schema,
                            const std::set<std::string> &missing_tokens = default_missing_tokens());

/// Requires exactly one target and one prediction column in the schema.
ScoredDataset parse_scored_csv(std::string_view text, const Schema &schema,
                               const std::set<std::string> &missing_tokens = default_missing_tokens());
ScoredDataset load_scored_csv(const std::string &path, const Schema &schema,
                              const std::set<std::string> &missing_tokens = default_missing_tokens());

/// Header plus rows; numbers use shortest round-trip formatting, missing
/// cells are written empty.
std::string to_csv(const FeatureFrame &frame);

/// Writes features followed by outcome columns named after the schema roles
/// (or "y_true", "y_pred", ... when the schema lacks that role).
std::string to_csv(const ScoredDataset &ds, const Schema &schema);

std::string format_number(double value);

struct LabeledSplit {
  std::string label;
  std::vector<std::size_t> rows;
  ScoredDataset data;
};

/// Seeded shuffle then floor allocation; remainder rows go to earlier labels.
/// Rows inside each part keep their original order.
std::vector<LabeledSplit> split_dataset(const ScoredDataset &ds,
                                        const std::vector<std::pair<std::string, double>> &fractions,
                                        std::uint64_t seed);

/// Stable ordering of opaque timestamps: numeric when every value parses as
/// a number, lexicographic otherwise (ISO-8601 sorts correctly that way).
std::vector<std::size_t> timestamp_order(const std::vector<std::string> &timestamps);

/// Numeric timestamp values, or nullopt when any value is non-numeric.
std::optional<std::vector<double>> numeric_timestamps(const std::vector<std::string> &timestamps);

}  // namespace valmon
