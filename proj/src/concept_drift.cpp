#include "valmon/concept_drift.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "valmon/linalg.hpp"
#include "valmon/stats.hpp"

namespace valmon {

const char *to_string(MatchMetric m) {
  return m == MatchMetric::mahalanobis ? "mahalanobis" : "euclidean_standardized";
}

MatchMetric parse_match_metric(std::string_view text) {
  if (text == "euclidean_standardized") return MatchMetric::euclidean_standardized;
  if (text == "mahalanobis") return MatchMetric::mahalanobis;
  throw InvalidArgument("match metric must be euclidean_standardized or mahalanobis, got '" + std::string(text) + "'");
}

const char *to_string(ResidualTest t) { return t == ResidualTest::cvm ? "cvm" : "ks"; }

ResidualTest parse_residual_test(std::string_view text) {
  if (text == "ks") return ResidualTest::ks;
  if (text == "cvm") return ResidualTest::cvm;
  throw InvalidArgument("residual test must be ks or cvm, got '" + std::string(text) + "'");
}

const char *to_string(DriftVerdict v) {
  switch (v) {
    case DriftVerdict::input_drift: return "input_drift";
    case DriftVerdict::concept_drift: return "concept_drift";
    case DriftVerdict::both: return "both";
    case DriftVerdict::no_drift: break;
  }
  return "no_drift";
}

const char *to_string(WindowUnit u) { return u == WindowUnit::time ? "time" : "rows"; }

const char *to_string(Better b) {
  switch (b) {
    case Better::a: return "a";
    case Better::b: return "b";
    case Better::tie: break;
  }
  return "tie";
}

// ---------------------------------------------------------------------------
// Matching

namespace {

std::vector<std::string> shared_numeric(const FeatureFrame &a, const FeatureFrame &b) {
  require_same_schema(a, b);
  return a.numeric_names();
}

// Maps rows into a space where plain Euclidean distance is the chosen metric.
Eigen::MatrixXd whitening(const Eigen::MatrixXd &dev, MatchMetric metric, Eigen::VectorXd &center) {
  const auto d = dev.cols();
  if (metric == MatchMetric::euclidean_standardized) {
    const auto s = Standardizer<double>::fit(dev);
    center = s.mean;
    return s.scale.cwiseInverse().asDiagonal();
  }
  center = dev.colwise().mean().transpose();
  Eigen::MatrixXd cov = sample_covariance(dev);
  const double trace = cov.trace();
  const double ridge = 1e-6 * (trace > 0.0 ? trace / static_cast<double>(d) : 1.0);
  cov.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  // z = L^{-1} x, returned as a right-multiplier for row vectors.
  const Eigen::MatrixXd l_inv = llt.matrixL().solve(Eigen::MatrixXd::Identity(d, d));
  return l_inv.transpose();
}

}  // namespace

MatchResult nn_match(const FeatureFrame &new_rows, const FeatureFrame &dev, std::size_t k, MatchMetric metric) {
  const auto names = shared_numeric(new_rows, dev);
  if (dev.n_rows() == 0) throw EmptyDevSet("development set has no rows");
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (k > dev.n_rows())
    throw KExceedsRows("k = " + std::to_string(k) + " exceeds " + std::to_string(dev.n_rows()) + " dev rows");
  if (names.empty()) throw InvalidArgument("matching needs at least one numeric feature");

  const Eigen::MatrixXd dev_x = numeric_matrix(dev, names);
  const Eigen::MatrixXd new_x = numeric_matrix(new_rows, names);
  Eigen::VectorXd center;
  const Eigen::MatrixXd w = whitening(dev_x, metric, center);
  const Eigen::MatrixXd zd = (dev_x.rowwise() - center.transpose()) * w;
  const Eigen::MatrixXd zn = (new_x.rowwise() - center.transpose()) * w;

  MatchResult result;
  result.k = k;
  result.distance_metric = metric;
  const auto n_new = static_cast<std::size_t>(zn.rows());
  const auto n_dev = static_cast<std::size_t>(zd.rows());
  result.matched_dev_indices.reserve(n_new * k);
  result.distances.reserve(n_new * k);

  std::vector<std::pair<double, std::size_t>> cand(n_dev);
  for (std::size_t i = 0; i < n_new; ++i) {
    const Eigen::RowVectorXd row = zn.row(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < n_dev; ++j) cand[j] = {(zd.row(static_cast<Eigen::Index>(j)) - row).squaredNorm(), j};
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t t = 0; t < k; ++t) {
      result.matched_dev_indices.push_back(cand[t].second);
      result.distances.push_back(std::sqrt(cand[t].first));
    }
  }
  if (!result.distances.empty()) result.mean_match_distance = mean(result.distances);
  return result;
}

// ---------------------------------------------------------------------------
// Residual tests

double cvm_statistic(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw EmptySample("Cramer-von Mises test needs two nonempty samples");
  const std::size_t n = x.size(), m = y.size(), total = n + m;
  std::vector<std::pair<double, std::size_t>> pooled;  // value, origin (0 = x)
  pooled.reserve(total);
  for (double v : x) pooled.push_back({v, 0});
  for (double v : y) pooled.push_back({v, 1});
  std::sort(pooled.begin(), pooled.end());

  // Mid-ranks within each sample, in ascending order.
  std::vector<double> rx, ry;
  rx.reserve(n);
  ry.reserve(m);
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) (pooled[t].second == 0 ? rx : ry).push_back(rank);
    i = j;
  }
  double ux = 0.0, uy = 0.0;
  for (std::size_t i = 0; i < n; ++i) ux += std::pow(rx[i] - static_cast<double>(i + 1), 2);
  for (std::size_t j = 0; j < m; ++j) uy += std::pow(ry[j] - static_cast<double>(j + 1), 2);
  const double dn = static_cast<double>(n), dm = static_cast<double>(m), dk = dn * dm, dN = dn + dm;
  const double u = dn * ux + dm * uy;
  return u / (dk * dN) - (4.0 * dk - 1.0) / (6.0 * dN);
}

double cvm_limit_cdf(double x) {
  if (!(x > 0.0)) return 0.0;
  constexpr double pi = 3.14159265358979323846;
  double total = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double y = 4.0 * k + 1.0;
    const double q = y * y / (16.0 * x);
    double term = 0.0;
    if (q < 700.0) {
      const double u = std::exp(std::lgamma(k + 0.5) - std::lgamma(k + 1.0)) / (std::pow(pi, 1.5) * std::sqrt(x));
      term = u * std::sqrt(y) * std::exp(-q) * std::cyl_bessel_k(0.25, q);
    }
    total += term;
    if (std::abs(term) < 1e-7) break;
  }
  return total;
}

double cvm_pvalue(double statistic, std::size_t n, std::size_t m) {
  const double dn = static_cast<double>(n), dm = static_cast<double>(m), k = dn * dm, N = dn + dm;
  const double et = (1.0 + 1.0 / N) / 6.0;
  const double vt = (N + 1.0) * (4.0 * k * N - 3.0 * (dn * dn + dm * dm) - 2.0 * k) / (45.0 * N * N * 4.0 * k);
  const double tn = 1.0 / 6.0 + (statistic - et) / std::sqrt(45.0 * vt);
  if (tn < 0.003) return 1.0;
  return std::clamp(1.0 - cvm_limit_cdf(tn), 0.0, 1.0);
}

TwoSampleResult residual_two_sample_test(const Residuals &res_new, const Residuals &res_matched, ResidualTest test) {
  if (res_new.values.empty() || res_matched.values.empty())
    throw EmptySample("residual test needs two nonempty samples");
  TwoSampleResult r;
  r.test_name = to_string(test);
  if (test == ResidualTest::ks) {
    const auto ks = ks_two_sample(res_new.values, res_matched.values);
    r.statistic = ks.statistic;
    r.p_value = ks.p_value;
  } else {
    r.statistic = cvm_statistic(res_new.values, res_matched.values);
    r.p_value = cvm_pvalue(r.statistic, res_new.values.size(), res_matched.values.size());
  }
  return r;
}

DriftDiagnosis classify_drift(const ScoredDataset &reference, const ScoredDataset &current,
                              const ConceptDriftConfig &config, const std::vector<DriftResult> *input_evidence) {
  DriftDiagnosis diag;
  diag.input_drift_evidence =
      input_evidence ? *input_evidence : drift_scan(reference.frame(), current.frame(), config.drift);
  diag.input_drift = std::any_of(diag.input_drift_evidence.begin(), diag.input_drift_evidence.end(),
                                 [](const DriftResult &r) { return r.verdict == Verdict::fail; });

  const auto match = nn_match(current.frame(), reference.frame(), config.k, config.match_metric);
  diag.mean_match_distance = match.mean_match_distance;
  diag.distinct_matched_rows =
      std::set<std::size_t>(match.matched_dev_indices.begin(), match.matched_dev_indices.end()).size();

  const auto ref_res = residuals(reference).values;
  Residuals matched;
  matched.values.reserve(match.matched_dev_indices.size());
  for (auto idx : match.matched_dev_indices) matched.values.push_back(ref_res[idx]);
  diag.residual_test = residual_two_sample_test(residuals(current), matched, config.test);

  const bool concept_found = diag.residual_test.p_value < config.p_threshold;
  if (concept_found)
    diag.verdict = diag.input_drift ? DriftVerdict::both : DriftVerdict::concept_drift;
  else
    diag.verdict = diag.input_drift ? DriftVerdict::input_drift : DriftVerdict::no_drift;

  if (reference.frame().numeric_names().size() < reference.frame().n_cols())
    diag.notes.push_back("matching used numeric features only");
  if (config.k > 1) diag.notes.push_back("matched residuals pooled over " + std::to_string(config.k) + " neighbours");
  return diag;
}

// ---------------------------------------------------------------------------
// Sliding windows

namespace {

// Days since 1970-01-01 in the proleptic Gregorian calendar.
long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

}  // namespace

std::optional<double> parse_timestamp_seconds(const std::string &text) {
  double number = 0.0;
  const auto *end = text.data() + text.size();
  if (auto [ptr, ec] = std::from_chars(text.data(), end, number); ec == std::errc() && ptr == end) return number;

  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double s = 0.0;
  char sep = 0;
  int consumed = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed) != 3 || consumed != 10) return std::nullopt;
  std::size_t pos = 10;
  if (pos < text.size()) {
    sep = text[pos];
    if (sep != 'T' && sep != ' ') return std::nullopt;
    int used = 0;
    if (std::sscanf(text.c_str() + pos + 1, "%2d:%2d%n", &h, &mi, &used) != 2 || used != 5) return std::nullopt;
    pos += 1 + static_cast<std::size_t>(used);
    if (pos < text.size() && text[pos] == ':') {
      const char *start = text.c_str() + pos + 1;
      char *stop = nullptr;
      s = std::strtod(start, &stop);
      if (stop == start) return std::nullopt;
      pos = static_cast<std::size_t>(stop - text.c_str());
    }
    if (pos < text.size() && text[pos] == 'Z') ++pos;
    if (pos != text.size()) return std::nullopt;
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s < 0.0 || s >= 61.0) return std::nullopt;
  const auto days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + s;
}

std::vector<WindowPoint> sliding_window_eval(const ScoredDataset &ds, const WindowSpec &spec, ErrorMetric metric,
                                             std::size_t min_rows) {
  if (!(spec.window > 0.0) || !(spec.step > 0.0)) throw InvalidArgument("window and step must be positive");
  if (spec.window < spec.step) throw InvalidArgument("window must be at least as long as step");
  require_compatible(metric, ds.y_true());
  const auto &stamps = ds.timestamps();
  if (spec.unit == WindowUnit::time && !stamps) throw NoTimestamps("time windows need a timestamp column");

  std::vector<std::size_t> order(ds.n_rows());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> t;
  if (spec.unit == WindowUnit::time) {
    t.resize(ds.n_rows());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto v = parse_timestamp_seconds((*stamps)[i]);
      if (!v) throw InvalidArgument("timestamp '" + (*stamps)[i] + "' is neither numeric nor ISO-8601");
      t[i] = *v;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
  } else if (stamps) {
    order = timestamp_order(*stamps);
  }

  std::vector<WindowPoint> series;
  if (order.empty()) return series;
  // Position of each ordered row along the window axis.
  std::vector<double> axis(order.size());
  for (std::size_t r = 0; r < order.size(); ++r)
    axis[r] = spec.unit == WindowUnit::time ? t[order[r]] : static_cast<double>(r);
  const double first = axis.front();
  const double last = spec.unit == WindowUnit::time ? axis.back() : static_cast<double>(order.size());

  for (std::size_t w = 0;; ++w) {
    const double start = first + static_cast<double>(w) * spec.step;
    const double end = start + spec.window;
    const bool final_window = end >= last;
    std::vector<std::size_t> rows;
    const auto lo = std::lower_bound(axis.begin(), axis.end(), start);
    const auto hi = (final_window && spec.unit == WindowUnit::time) ? std::upper_bound(lo, axis.end(), end)
                                                                    : std::lower_bound(lo, axis.end(), end);
    for (auto it = lo; it != hi; ++it) rows.push_back(order[static_cast<std::size_t>(it - axis.begin())]);

    WindowPoint p;
    p.window_start = start;
    p.window_end = end;
    p.rows = rows.size();
    if (spec.unit == WindowUnit::rows) {
      p.start_label = stamps && lo != axis.end() ? (*stamps)[order[static_cast<std::size_t>(lo - axis.begin())]]
                                                 : format_number(start);
    } else {
      p.start_label = format_number(start);
    }
    if (rows.size() >= min_rows && !rows.empty()) {
      std::vector<double> yt, yp;
      for (auto r : rows) {
        yt.push_back(ds.y_true()[r]);
        yp.push_back(ds.y_pred()[r]);
      }
      p.value = evaluate_metric(metric, yt, yp);
    }
    series.push_back(std::move(p));
    if (final_window) break;
  }
  return series;
}

// ---------------------------------------------------------------------------
// Paired comparison

PairedComparison paired_model_comparison(std::span<const double> errors_a, std::span<const double> errors_b,
                                         double alpha) {
  if (errors_a.size() != errors_b.size())
    throw LengthMismatch("paired comparison needs equal lengths, got " + std::to_string(errors_a.size()) + " and " +
                         std::to_string(errors_b.size()));
  if (errors_a.size() < 2) throw InvalidArgument("paired comparison needs at least two rows");
  PairedComparison out;
  out.n = errors_a.size();
  std::vector<double> d(out.n);
  for (std::size_t i = 0; i < out.n; ++i) d[i] = errors_a[i] - errors_b[i];
  out.mean_diff = mean(d);
  const double sd = sample_std(d);
  const bool all_zero = std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; });
  if (all_zero) {
    out.mean_diff = 0.0;
    out.p_value = 1.0;
    out.better = Better::tie;
    return out;
  }
  if (sd == 0.0) {
    out.degenerate = true;
    out.t_statistic = out.mean_diff > 0 ? std::numeric_limits<double>::infinity()
                                        : -std::numeric_limits<double>::infinity();
    out.p_value = 0.0;
  } else {
    out.t_statistic = out.mean_diff / (sd / std::sqrt(static_cast<double>(out.n)));
    boost::math::students_t dist(static_cast<double>(out.n - 1));
    out.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t_statistic))));
  }
  if (out.p_value < alpha) out.better = out.mean_diff > 0 ? Better::b : Better::a;
  return out;
}

// ---------------------------------------------------------------------------
// Segment error tracking

SegmentErrorSeries segment_error_tracking(const std::vector<ScoredDataset> &batches, const std::string &feature,
                                          const BinSpec &bins, ErrorMetric metric, std::size_t min_rows) {
  if (batches.empty()) throw EmptyDataset("segment tracking needs at least one batch");
  for (std::size_t b = 1; b < batches.size(); ++b) require_same_schema(batches.front().frame(), batches[b].frame());
  const auto edges = resolve_edges(batches.front().frame().numeric(feature), bins);

  SegmentErrorSeries out;
  out.metric = metric;
  std::map<std::string, std::size_t> index;
  const std::size_t n_batches = batches.size();
  auto slot = [&](const std::string &label) {
    auto [it, inserted] = index.emplace(label, out.labels.size());
    if (inserted) {
      out.labels.push_back(label);
      out.values.emplace_back(n_batches);
      out.rows.emplace_back(n_batches, 0);
    }
    return it->second;
  };
  for (std::size_t b = 0; b < n_batches; ++b) {
    const auto &ds = batches[b];
    require_compatible(metric, ds.y_true());
    const auto seg = segment_by_edges(ds.frame().numeric(feature), edges);
    const auto members = seg.members();
    for (std::size_t s = 0; s < members.size(); ++s) {
      const auto i = slot(seg.labels[s]);
      out.rows[i][b] = members[s].size();
      if (members[s].size() < min_rows || members[s].empty()) continue;
      std::vector<double> yt, yp;
      for (auto r : members[s]) {
        yt.push_back(ds.y_true()[r]);
        yp.push_back(ds.y_pred()[r]);
      }
      out.values[i][b] = evaluate_metric(metric, yt, yp);
    }
  }
  out.ratio_to_first.resize(out.labels.size());
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    out.ratio_to_first[i].resize(n_batches);
    std::optional<double> base;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const auto &v = out.values[i][b];
      if (!v) continue;
      if (!base) base = *v;
      if (*base != 0.0) out.ratio_to_first[i][b] = *v / *base;
      else if (*v == 0.0) out.ratio_to_first[i][b] = 1.0;
    }
  }
  return out;
}

}  // namespace valmon
