#include "valmon/data_quality.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "valmon/linalg.hpp"
#include "valmon/stats.hpp"

namespace valmon {

MissingnessProfile profile_missingness(const FeatureFrame &frame) {
  MissingnessProfile profile;
  const std::size_t n = frame.n_rows();
  std::vector<bool> row_complete(n, true);
  for (const auto &col : frame.columns()) {
    ColumnMissingness cm;
    cm.column = column_name(col);
    for (std::size_t i = 0; i < n; ++i) {
      if (column_missing(col, i)) {
        ++cm.missing_count;
        row_complete[i] = false;
      }
    }
    cm.missing_fraction = n ? static_cast<double>(cm.missing_count) / static_cast<double>(n) : 0.0;
    profile.columns.push_back(std::move(cm));
  }
  if (n) {
    const auto complete = std::count(row_complete.begin(), row_complete.end(), true);
    profile.row_complete_fraction = static_cast<double>(complete) / static_cast<double>(n);
  }
  return profile;
}

const char *to_string(ImputeStrategy s) {
  switch (s) {
    case ImputeStrategy::mean: return "mean";
    case ImputeStrategy::median: return "median";
    case ImputeStrategy::mode: return "mode";
    case ImputeStrategy::missing_as_category: return "missing_as_category";
  }
  return "mean";
}

ImputeStrategy parse_impute_strategy(std::string_view text) {
  for (auto s : {ImputeStrategy::mean, ImputeStrategy::median, ImputeStrategy::mode,
                 ImputeStrategy::missing_as_category})
    if (text == to_string(s)) return s;
  throw InvalidArgument("unknown imputation strategy '" + std::string(text) + "'");
}

namespace {

NumericColumn impute_numeric(const NumericColumn &col, ImputeStrategy strategy) {
  if (strategy != ImputeStrategy::mean && strategy != ImputeStrategy::median)
    throw StrategyKindMismatch(std::string(to_string(strategy)) + " does not apply to numeric column '" +
                               col.name + "'");
  const auto observed = col.observed();
  if (observed.empty()) throw AllMissingColumn("column '" + col.name + "' has no observed values");
  const double fill = strategy == ImputeStrategy::mean ? mean(observed) : median(observed);
  NumericColumn out = col;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.missing[i]) {
      out.values[i] = fill;
      out.missing[i] = false;
    }
  }
  return out;
}

CategoricalColumn impute_categorical(const CategoricalColumn &col, ImputeStrategy strategy) {
  if (strategy != ImputeStrategy::mode && strategy != ImputeStrategy::missing_as_category)
    throw StrategyKindMismatch(std::string(to_string(strategy)) + " does not apply to categorical column '" +
                               col.name + "'");
  CategoricalColumn out = col;
  const bool any_missing = std::find(col.missing.begin(), col.missing.end(), true) != col.missing.end();
  int fill = -1;
  if (strategy == ImputeStrategy::mode) {
    std::vector<std::size_t> counts(col.labels.size(), 0);
    for (std::size_t i = 0; i < col.size(); ++i)
      if (!col.missing[i]) ++counts[static_cast<std::size_t>(col.codes[i])];
    if (std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == 0)
      throw AllMissingColumn("column '" + col.name + "' has no observed values");
    // Ties resolve to the earliest-appearing label.
    fill = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  } else if (any_missing) {
    auto it = std::find(out.labels.begin(), out.labels.end(), kMissingCategory);
    if (it == out.labels.end()) {
      out.labels.emplace_back(kMissingCategory);
      it = out.labels.end() - 1;
    }
    fill = static_cast<int>(it - out.labels.begin());
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.missing[i]) {
      out.codes[i] = fill;
      out.missing[i] = false;
    }
  }
  return out;
}

}  // namespace

FeatureFrame impute(const FeatureFrame &frame, const std::map<std::string, ImputeStrategy> &strategies) {
  std::vector<Column> cols = frame.columns();
  for (const auto &[name, strategy] : strategies) {
    const auto *target = frame.find(name);
    if (!target) throw UnknownFeature("cannot impute unknown column '" + name + "'");
    for (auto &c : cols) {
      if (column_name(c) != name) continue;
      if (const auto *num = std::get_if<NumericColumn>(&c)) c = impute_numeric(*num, strategy);
      else c = impute_categorical(std::get<CategoricalColumn>(c), strategy);
    }
  }
  return FeatureFrame(std::move(cols));
}

const char *to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::out_of_range: return "out_of_range";
    case ViolationKind::invalid_category: return "invalid_category";
    case ViolationKind::wrong_type: return "wrong_type";
  }
  return "out_of_range";
}

std::vector<RuleViolation> validate_rules(const FeatureFrame &frame, const Schema &schema) {
  std::vector<RuleViolation> out;
  for (const auto &spec : schema.columns()) {
    const auto *col = frame.find(spec.name);
    if (!col) continue;
    for (std::size_t i = 0; i < frame.n_rows(); ++i) {
      if (column_missing(*col, i)) continue;
      if (const auto *num = std::get_if<NumericColumn>(col)) {
        const double v = num->values[i];
        if (spec.kind != ColumnKind::numeric) {
          out.push_back({i, spec.name, ViolationKind::wrong_type, format_number(v)});
        } else if (spec.valid_range && (v < spec.valid_range->first || v > spec.valid_range->second)) {
          out.push_back({i, spec.name, ViolationKind::out_of_range, format_number(v)});
        } else if (!std::isfinite(v)) {
          out.push_back({i, spec.name, ViolationKind::wrong_type, format_number(v)});
        }
      } else {
        const auto &cat = std::get<CategoricalColumn>(*col);
        const auto &label = cat.label_at(i);
        if (spec.kind == ColumnKind::numeric) {
          double parsed;
          const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), parsed);
          if (ec != std::errc() || ptr != label.data() + label.size())
            out.push_back({i, spec.name, ViolationKind::wrong_type, label});
          else if (spec.valid_range && (parsed < spec.valid_range->first || parsed > spec.valid_range->second))
            out.push_back({i, spec.name, ViolationKind::out_of_range, label});
        } else if (spec.valid_categories &&
                   std::find(spec.valid_categories->begin(), spec.valid_categories->end(), label) ==
                       spec.valid_categories->end()) {
          out.push_back({i, spec.name, ViolationKind::invalid_category, label});
        }
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const RuleViolation &a, const RuleViolation &b) { return a.row < b.row; });
  return out;
}

const char *to_string(OutlierMethod m) {
  switch (m) {
    case OutlierMethod::zscore: return "zscore";
    case OutlierMethod::iqr: return "iqr";
    case OutlierMethod::lof: return "lof";
    case OutlierMethod::pca_mahalanobis: return "pca_mahalanobis";
  }
  return "zscore";
}

std::size_t OutlierScoreSet::flagged_count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

namespace {

OutlierScoreSet finish(OutlierScoreSet set) {
  set.flags.resize(set.scores.size());
  for (std::size_t i = 0; i < set.scores.size(); ++i) set.flags[i] = set.scores[i] > set.threshold;
  return set;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

OutlierScoreSet outliers_zscore(const NumericColumn &column, double z_threshold) {
  const auto observed = column.observed();
  if (observed.size() < 2) throw TooFewRows("z-score needs at least two observed values");
  OutlierScoreSet set;
  set.method = OutlierMethod::zscore;
  set.threshold = z_threshold;
  set.params = {{"z_threshold", z_threshold}};
  const double m = mean(observed);
  const double sd = sample_std(observed);
  set.scores.assign(column.size(), kNaN);
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (column.missing[i]) continue;
    set.scores[i] = sd > 0.0 ? std::abs(column.values[i] - m) / sd : 0.0;
  }
  if (!(sd > 0.0)) set.warnings.push_back("DegenerateColumn: '" + column.name + "' has zero variance");
  return finish(std::move(set));
}

OutlierScoreSet outliers_iqr(const NumericColumn &column, double multiplier) {
  auto observed = column.observed();
  if (observed.size() < 4) throw TooFewRows("IQR method needs at least four observed values");
  std::sort(observed.begin(), observed.end());
  const double q1 = quantile_sorted<double>(observed, 0.25);
  const double q3 = quantile_sorted<double>(observed, 0.75);
  const double iqr = q3 - q1;
  OutlierScoreSet set;
  set.method = OutlierMethod::iqr;
  set.threshold = multiplier * iqr;
  set.params = {{"multiplier", multiplier}, {"q1", q1}, {"q3", q3}, {"iqr", iqr}};
  set.scores.assign(column.size(), kNaN);
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (column.missing[i]) continue;
    const double v = column.values[i];
    set.scores[i] = std::max({0.0, q1 - v, v - q3});
  }
  return finish(std::move(set));
}

OutlierScoreSet outliers_lof(const Eigen::MatrixXd &raw, std::size_t k, double threshold) {
  const auto n = static_cast<std::size_t>(raw.rows());
  if (k < 1) throw InvalidArgument("LOF needs k >= 1");
  if (k >= n) throw InvalidArgument("LOF needs k < number of rows");
  constexpr double kFloor = 1e-12;

  const Eigen::MatrixXd data = Standardizer<double>::fit(raw).apply(raw);

  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<std::vector<double>> neighbor_dist(n);
  std::vector<double> k_distance(n);
  std::vector<double> dist(n);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd d = (data.rowwise() - data.row(static_cast<Eigen::Index>(i))).rowwise().norm();
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      dist[j] = d(static_cast<Eigen::Index>(j));
      if (j != i) order.push_back(j);
    }
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    k_distance[i] = dist[order[k - 1]];
    // Neighbourhood includes every point tied at the k-distance.
    for (std::size_t j : order) {
      if (dist[j] <= k_distance[i]) {
        neighbors[i].push_back(j);
        neighbor_dist[i].push_back(dist[j]);
      }
    }
  }

  std::vector<double> lrd(n);
  for (std::size_t i = 0; i < n; ++i) {
    double reach = 0.0;
    for (std::size_t t = 0; t < neighbors[i].size(); ++t)
      reach += std::max(k_distance[neighbors[i][t]], neighbor_dist[i][t]);
    reach /= static_cast<double>(neighbors[i].size());
    lrd[i] = 1.0 / std::max(reach, kFloor);
  }

  OutlierScoreSet set;
  set.method = OutlierMethod::lof;
  set.threshold = threshold;
  set.params = {{"k", static_cast<double>(k)}, {"threshold", threshold}};
  set.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ratio = 0.0;
    for (std::size_t j : neighbors[i]) ratio += lrd[j];
    set.scores[i] = ratio / static_cast<double>(neighbors[i].size()) / lrd[i];
  }
  return finish(std::move(set));
}

OutlierScoreSet outliers_lof(const FeatureFrame &frame, std::size_t k, double threshold) {
  if (frame.numeric_names().size() != frame.n_cols())
    throw InvalidArgument("LOF requires a numeric-only frame");
  return outliers_lof(numeric_matrix(frame), k, threshold);
}

double chi_squared_quantile(double prob, double dof) {
  boost::math::chi_squared_distribution<double> dist(dof);
  return boost::math::quantile(dist, prob);
}

OutlierScoreSet outliers_pca_mahalanobis(const Eigen::MatrixXd &data, double variance_fraction, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const auto pca = Pca<double>::fit(data, variance_fraction);
  OutlierScoreSet set;
  set.method = OutlierMethod::pca_mahalanobis;
  set.params = {{"variance_fraction", variance_fraction},
                {"alpha", alpha},
                {"components", static_cast<double>(pca.retained())}};
  if (pca.rank_deficient())
    set.warnings.push_back("RankDeficient: retained all " + std::to_string(pca.retained()) +
                           " nonzero-variance components");
  const Eigen::VectorXd d2 = pca.mahalanobis_squared(data);
  set.scores.assign(d2.data(), d2.data() + d2.size());
  set.threshold = pca.retained() > 0 ? chi_squared_quantile(1.0 - alpha, static_cast<double>(pca.retained()))
                                     : std::numeric_limits<double>::infinity();
  return finish(std::move(set));
}

OutlierScoreSet outliers_pca_mahalanobis(const FeatureFrame &frame, double variance_fraction, double alpha) {
  if (frame.numeric_names().size() != frame.n_cols())
    throw InvalidArgument("PCA-Mahalanobis requires a numeric-only frame");
  return outliers_pca_mahalanobis(numeric_matrix(frame), variance_fraction, alpha);
}

}  // namespace valmon
