#include "valmon/outcome_analysis.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "valmon/linalg.hpp"
#include "valmon/shift_metrics.hpp"
#include "valmon/stats.hpp"

namespace valmon {

const char *to_string(SegmentSource s) { return s == SegmentSource::kmeans ? "kmeans" : "binned"; }

const char *to_string(FitFlag f) {
  switch (f) {
    case FitFlag::overfit: return "overfit";
    case FitFlag::underfit: return "underfit";
    case FitFlag::ok: break;
  }
  return "ok";
}

const char *to_string(InvarianceMode m) { return m == InvarianceMode::constant ? "constant" : "permute"; }

InvarianceMode parse_invariance_mode(std::string_view text) {
  if (text == "permute") return InvarianceMode::permute;
  if (text == "constant") return InvarianceMode::constant;
  throw InvalidArgument("invariance mode must be 'permute' or 'constant', got '" + std::string(text) + "'");
}

std::vector<std::vector<std::size_t>> SegmentAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(labels.size());
  for (std::size_t i = 0; i < segment_ids.size(); ++i) out[static_cast<std::size_t>(segment_ids[i])].push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// Binning

std::vector<double> resolve_edges(const NumericColumn &column, const BinSpec &spec) {
  if (spec.quantiles == 0) {
    if (spec.edges.size() < 2) throw InvalidArgument("explicit binning needs at least two edges");
    for (std::size_t i = 1; i < spec.edges.size(); ++i)
      if (!(spec.edges[i] > spec.edges[i - 1])) throw InvalidArgument("bin edges must be strictly ascending");
    return spec.edges;
  }
  if (spec.quantiles < 2) throw InvalidArgument("quantile binning needs a count of at least 2");
  auto observed = column.observed();
  if (observed.empty()) throw AllMissingColumn("column '" + column.name + "' has no observed values");
  std::sort(observed.begin(), observed.end());
  std::vector<double> edges;
  for (std::size_t i = 0; i <= spec.quantiles; ++i) {
    const double q = quantile_sorted<double>(observed, static_cast<double>(i) / static_cast<double>(spec.quantiles));
    if (edges.empty() || q > edges.back()) edges.push_back(q);
  }
  return edges;
}

SegmentAssignment segment_by_edges(const NumericColumn &column, std::span<const double> edges) {
  if (edges.empty()) throw InvalidArgument("no bin edges");
  const std::size_t n_bins = std::max<std::size_t>(1, edges.size() - 1);
  SegmentAssignment seg;
  seg.source = SegmentSource::binned;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double lo = edges[b];
    const double hi = edges.size() == 1 ? edges[0] : edges[b + 1];
    const bool last = b + 1 == n_bins;
    seg.labels.push_back("[" + format_number(lo) + ", " + format_number(hi) + (last ? "]" : ")"));
  }
  int below = -1, above = -1, missing = -1;
  auto extra = [&seg](int &id, std::string label) {
    if (id < 0) {
      id = static_cast<int>(seg.labels.size());
      seg.labels.push_back(std::move(label));
    }
    return id;
  };
  seg.segment_ids.resize(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (column.is_missing(i)) {
      seg.segment_ids[i] = extra(missing, kMissingSegment);
      continue;
    }
    const double v = column.values[i];
    if (v < edges.front()) {
      seg.segment_ids[i] = extra(below, "< " + format_number(edges.front()));
    } else if (v > edges.back()) {
      seg.segment_ids[i] = extra(above, "> " + format_number(edges.back()));
    } else {
      auto b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin()) - 1;
      seg.segment_ids[i] = static_cast<int>(std::min(b, n_bins - 1));
    }
  }
  return seg;
}

SegmentAssignment segment_by_bins(const FeatureFrame &frame, const std::string &feature, const BinSpec &spec) {
  const auto &column = frame.numeric(feature);
  const auto edges = resolve_edges(column, spec);
  return segment_by_edges(column, edges);
}

// ---------------------------------------------------------------------------
// k-means

namespace {

// Nearest centroid with ties going to the lower index.
std::pair<Eigen::Index, double> nearest(const Eigen::MatrixXd &centroids, const Eigen::RowVectorXd &point) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {best, best_d};
}

Eigen::MatrixXd kmeans_pp(const Eigen::MatrixXd &z, std::size_t k, Rng &rng) {
  const auto n = static_cast<std::size_t>(z.rows());
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), z.cols());
  std::vector<bool> chosen(n, false);
  auto first = static_cast<std::size_t>(uniform_index(rng, n));
  chosen[first] = true;
  centroids.row(0) = z.row(static_cast<Eigen::Index>(first));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (z.row(static_cast<Eigen::Index>(i)) - centroids.row(0)).squaredNorm();

  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = uniform01(rng) * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > r) break;
      }
    } else {
      for (std::size_t i = 0; i < n && pick == n; ++i)
        if (!chosen[i]) pick = i;
    }
    chosen[pick] = true;
    centroids.row(static_cast<Eigen::Index>(c)) = z.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (z.row(static_cast<Eigen::Index>(i)) - centroids.row(static_cast<Eigen::Index>(c))).squaredNorm());
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd &data, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (n == 0) throw EmptyDataset("k-means on an empty matrix");
  if (k > n) throw KExceedsRows("k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " rows");

  const auto standardizer = Standardizer<double>::fit(data);
  const Eigen::MatrixXd z = standardizer.apply(data);
  Rng rng = derive_rng(seed, 0);
  Eigen::MatrixXd centroids = kmeans_pp(z, k, rng);

  KMeansResult result;
  std::vector<Eigen::Index> assign(n);
  std::vector<double> dist(n);
  auto assign_all = [&] {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [c, d] = nearest(centroids, z.row(static_cast<Eigen::Index>(i)));
      assign[i] = c;
      dist[i] = d;
      inertia += d;
    }
    return inertia;
  };

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const double inertia = assign_all();
    assert(result.inertia_history.empty() ||
           inertia <= result.inertia_history.back() * (1.0 + 1e-9) + 1e-12);
    result.inertia_history.push_back(inertia);

    Eigen::MatrixXd updated = Eigen::MatrixXd::Zero(centroids.rows(), centroids.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      updated.row(assign[i]) += z.row(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(assign[i])];
    }
    std::vector<bool> used(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      const auto row = static_cast<Eigen::Index>(c);
      if (counts[c] > 0) {
        updated.row(row) /= static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point worst served by its centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!used[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      used[far] = true;
      updated.row(row) = z.row(static_cast<Eigen::Index>(far));
    }
    const double movement = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(updated);
    result.iterations = iter + 1;
    if (movement < 1e-6) {
      result.converged = true;
      break;
    }
  }
  result.inertia = assign_all();
  result.inertia_history.push_back(result.inertia);

  result.assignment.source = SegmentSource::kmeans;
  result.assignment.segment_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.assignment.segment_ids[i] = static_cast<int>(assign[i]);
  for (std::size_t c = 0; c < k; ++c) result.assignment.labels.push_back("cluster " + std::to_string(c));
  result.centroids = (centroids.array().rowwise() * standardizer.scale.transpose().array()).rowwise() +
                     standardizer.mean.transpose().array();
  return result;
}

KMeansResult kmeans(const FeatureFrame &frame, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  const auto names = frame.numeric_names();
  if (names.empty()) throw InvalidArgument("k-means needs at least one numeric feature");
  return kmeans(numeric_matrix(frame, names), k, seed, max_iter);
}

// ---------------------------------------------------------------------------
// Segment metrics

namespace {

std::optional<double> metric_on(const ScoredDataset &ds, std::span<const std::size_t> rows, ErrorMetric metric,
                                double threshold) {
  std::vector<double> t, p;
  t.reserve(rows.size());
  p.reserve(rows.size());
  for (auto r : rows) {
    t.push_back(ds.y_true()[r]);
    p.push_back(ds.y_pred()[r]);
  }
  return evaluate_metric(metric, t, p, threshold);
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

SegmentMetricsTable segment_metrics(const ScoredDataset &ds, const SegmentAssignment &seg, ErrorMetric metric,
                                    double threshold) {
  if (seg.segment_ids.size() != ds.n_rows())
    throw LengthMismatch("segment assignment covers " + std::to_string(seg.segment_ids.size()) + " rows, dataset has " +
                         std::to_string(ds.n_rows()));
  require_compatible(metric, ds.y_true());
  SegmentMetricsTable table;
  table.metric = metric;
  table.overall = metric_on(ds, all_rows(ds.n_rows()), metric, threshold);

  const auto members = seg.members();
  for (std::size_t s = 0; s < members.size(); ++s) {
    SegmentMetricRow row;
    row.segment_id = static_cast<int>(s);
    row.label = seg.labels[s];
    row.rows = members[s].size();
    row.value = metric_on(ds, members[s], metric, threshold);
    if (row.value && table.overall) {
      if (*table.overall == 0.0) {
        if (*row.value != 0.0)
          throw InvalidArgument("lift undefined: overall " + std::string(to_string(metric)) + " is 0");
        row.lift = 1.0;
        row.degenerate = true;
      } else {
        row.lift = *row.value / *table.overall;
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<WeakRegion> weak_region_scan(const ScoredDataset &ds, const std::vector<std::string> &features,
                                         const WeakRegionOptions &options) {
  std::vector<WeakRegion> regions;
  if (ds.n_rows() < options.min_rows || features.empty()) return regions;
  const ErrorMetric metric = options.metric.value_or(default_metric(ds));
  for (const auto &feature : features) {
    const auto &column = ds.frame().numeric(feature);
    if (column.observed().empty()) continue;
    const auto seg = segment_by_bins(ds.frame(), feature, BinSpec::quantile(options.bins));
    const auto table = segment_metrics(ds, seg, metric);
    for (const auto &row : table.rows) {
      if (row.rows < options.min_rows || !row.value || !row.lift) continue;
      regions.push_back({feature, row.label, row.rows, *row.value, *row.lift});
    }
  }
  std::stable_sort(regions.begin(), regions.end(), [](const WeakRegion &a, const WeakRegion &b) {
    if (a.lift != b.lift) return a.lift > b.lift;
    if (a.rows != b.rows) return a.rows > b.rows;
    return a.feature < b.feature;
  });
  return regions;
}

FitGapReport fit_gap(const ScoredDataset &train, const ScoredDataset &test, const std::optional<FitGapBasis> &basis,
                     std::optional<ErrorMetric> metric, const FitGapThresholds &thresholds) {
  require_same_schema(train.frame(), test.frame());
  FitGapReport report;
  report.metric = metric.value_or(default_metric(train));
  report.thresholds = thresholds;
  report.overall_train = metric_on(train, all_rows(train.n_rows()), report.metric, 0.5);
  report.overall_test = metric_on(test, all_rows(test.n_rows()), report.metric, 0.5);

  // Segment label -> (train rows, test rows), in first-seen order.
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  if (basis) {
    const auto edges = resolve_edges(train.frame().numeric(basis->feature), basis->bins);
    const auto seg_train = segment_by_edges(train.frame().numeric(basis->feature), edges);
    const auto seg_test = segment_by_edges(test.frame().numeric(basis->feature), edges);
    auto add = [&](const SegmentAssignment &seg, bool is_train) {
      const auto members = seg.members();
      for (std::size_t s = 0; s < members.size(); ++s) {
        const auto &label = seg.labels[s];
        if (!groups.count(label)) order.push_back(label);
        auto &slot = is_train ? groups[label].first : groups[label].second;
        slot = members[s];
      }
    };
    add(seg_train, true);
    add(seg_test, false);
  } else {
    order.push_back("all");
    groups["all"] = {all_rows(train.n_rows()), all_rows(test.n_rows())};
  }

  for (const auto &label : order) {
    const auto &[train_rows, test_rows] = groups[label];
    FitGapRow row;
    row.segment = label;
    row.train_rows = train_rows.size();
    row.test_rows = test_rows.size();
    row.train_metric = metric_on(train, train_rows, report.metric, 0.5);
    row.test_metric = metric_on(test, test_rows, report.metric, 0.5);
    if (row.train_metric && row.test_metric) {
      row.gap = *row.test_metric - *row.train_metric;
      if (report.overall_train && report.overall_test) {
        const double otr = *report.overall_train, ote = *report.overall_test;
        if (*row.train_metric > thresholds.underfit_multiplier * otr &&
            *row.test_metric > thresholds.underfit_multiplier * ote)
          row.flag = FitFlag::underfit;
        // The "below overall train" clause is vacuous for the single unsegmented row.
        else if (*row.gap > thresholds.overfit_fraction * ote && (!basis || *row.train_metric < otr))
          row.flag = FitFlag::overfit;
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Robustness

SensitivityReport perturbation_test(const Model &model, const FeatureFrame &frame, double noise_fraction,
                                    std::size_t n_repeats, std::uint64_t seed) {
  if (noise_fraction < 0.0) throw InvalidArgument("noise_fraction must be non-negative");
  if (n_repeats == 0) throw InvalidArgument("n_repeats must be at least 1");
  SensitivityReport report;
  report.n_repeats = n_repeats;
  const auto base = model.predict(frame);
  const auto names = frame.numeric_names();
  for (std::size_t f = 0; f < names.size(); ++f) {
    const auto &column = frame.numeric(names[f]);
    const auto observed = column.observed();
    FeatureSensitivity fs;
    fs.feature = names[f];
    fs.noise_scale = noise_fraction;
    fs.noise_std = noise_fraction * sample_std(observed);
    std::vector<double> deltas;
    deltas.reserve(n_repeats * frame.n_rows());
    if (fs.noise_std > 0.0) {
      Rng rng = derive_rng(seed, f);
      for (std::size_t r = 0; r < n_repeats; ++r) {
        NumericColumn noisy = column;
        for (std::size_t i = 0; i < noisy.size(); ++i)
          if (!noisy.is_missing(i)) noisy.values[i] += fs.noise_std * standard_normal(rng);
        const auto pred = model.predict(frame.with_column(std::move(noisy)));
        for (std::size_t i = 0; i < pred.size(); ++i) deltas.push_back(std::abs(pred[i] - base[i]));
      }
    } else {
      deltas.assign(n_repeats * frame.n_rows(), 0.0);
    }
    if (!deltas.empty()) {
      fs.mean_abs_prediction_delta = mean(deltas);
      fs.p95_abs_delta = quantile<double>(deltas, 0.95);
    }
    report.features.push_back(std::move(fs));
  }
  return report;
}

namespace {

Column permuted(const Column &column, Rng &rng) {
  std::vector<std::size_t> perm(column_size(column));
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);
  return std::visit(
      [&](const auto &c) -> Column {
        auto out = c;
        for (std::size_t i = 0; i < perm.size(); ++i) {
          out.missing[i] = c.missing[perm[i]];
          if constexpr (std::is_same_v<std::decay_t<decltype(c)>, NumericColumn>)
            out.values[i] = c.values[perm[i]];
          else
            out.codes[i] = c.codes[perm[i]];
        }
        return out;
      },
      column);
}

Column constant_fill(const Column &column) {
  if (const auto *num = std::get_if<NumericColumn>(&column)) {
    const auto observed = num->observed();
    if (observed.empty()) return column;
    NumericColumn out = *num;
    std::fill(out.values.begin(), out.values.end(), median(observed));
    std::fill(out.missing.begin(), out.missing.end(), false);
    return out;
  }
  const auto &cat = std::get<CategoricalColumn>(column);
  std::vector<std::size_t> counts(cat.labels.size(), 0);
  for (int code : cat.codes)
    if (code >= 0) ++counts[static_cast<std::size_t>(code)];
  if (counts.empty() || *std::max_element(counts.begin(), counts.end()) == 0) return column;
  const int mode = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  CategoricalColumn out = cat;
  std::fill(out.codes.begin(), out.codes.end(), mode);
  std::fill(out.missing.begin(), out.missing.end(), false);
  return out;
}

}  // namespace

InvarianceReport invariance_test(const Model &model, const FeatureFrame &frame,
                                 const std::vector<std::string> &irrelevant, InvarianceMode mode, std::uint64_t seed,
                                 double tolerance) {
  InvarianceReport report;
  report.mode = mode;
  report.features = irrelevant;
  report.tolerance = tolerance;
  for (const auto &name : irrelevant) frame.column(name);
  if (irrelevant.empty() || frame.n_rows() == 0) return report;

  FeatureFrame altered = frame;
  for (std::size_t f = 0; f < irrelevant.size(); ++f) {
    const auto &column = altered.column(irrelevant[f]);
    if (mode == InvarianceMode::permute) {
      Rng rng = derive_rng(seed, f);
      altered = altered.with_column(permuted(column, rng));
    } else {
      altered = altered.with_column(constant_fill(column));
    }
  }
  const auto base = model.predict(frame);
  const auto pred = model.predict(altered);
  double sum = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double d = std::abs(pred[i] - base[i]);
    sum += d;
    report.max_abs_delta = std::max(report.max_abs_delta, d);
    if (d > tolerance) report.violating_rows.push_back(i);
  }
  report.mean_abs_delta = sum / static_cast<double>(base.size());
  return report;
}

}  // namespace valmon
