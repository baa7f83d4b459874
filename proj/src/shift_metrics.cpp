#include "valmon/shift_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_map>

namespace valmon {

EmpiricalDistribution::EmpiricalDistribution(std::span<const double> sample)
    : sorted_(sample.begin(), sample.end()) {
  if (sorted_.empty()) throw EmptySample("empirical distribution of an empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalDistribution::cdf(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

namespace {

std::vector<double> sorted_copy(std::span<const double> v, const char *what) {
  if (v.empty()) throw EmptySample(std::string(what) + " sample is empty");
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

/// Calls f(lo, hi, Fx, Fy) for every gap [lo, hi) between consecutive pooled
/// breakpoints, where Fx, Fy are the ECDF values on that gap. Also calls
/// f(v, v, Fx(v), Fy(v)) at each breakpoint first.
template <typename F>
void walk_ecdfs(const std::vector<double> &x, const std::vector<double> &y, F &&f) {
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j >= y.size() || (i < x.size() && x[i] <= y[j])) v = x[i];
    else v = y[j];
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    double next = v;
    if (i < x.size() && j < y.size()) next = std::min(x[i], y[j]);
    else if (i < x.size()) next = x[i];
    else if (j < y.size()) next = y[j];
    f(v, next, static_cast<double>(i) / n, static_cast<double>(j) / m);
  }
}

}  // namespace

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda >= 1.18) {
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = std::exp(-2.0 * k * k * lambda * lambda);
      sum += (k % 2 == 1 ? term : -term);
      if (term < 1e-300) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
  }
  // Jacobi theta form of the CDF; converges fast for small lambda.
  const double pi2 = std::numbers::pi * std::numbers::pi;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double term = std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
    sum += term;
    if (term < 1e-300) break;
  }
  const double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
  return std::clamp(1.0 - cdf, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> x, std::span<const double> y) {
  const auto xs = sorted_copy(x, "first");
  const auto ys = sorted_copy(y, "second");
  double d = 0.0;
  walk_ecdfs(xs, ys, [&](double, double, double fx, double fy) { d = std::max(d, std::abs(fx - fy)); });
  const double n = static_cast<double>(xs.size());
  const double m = static_cast<double>(ys.size());
  const double effective = n * m / (n + m);
  return {d, kolmogorov_survival(std::sqrt(effective) * d)};
}

double wasserstein1(std::span<const double> x, std::span<const double> y) {
  const auto xs = sorted_copy(x, "first");
  const auto ys = sorted_copy(y, "second");
  double area = 0.0;
  walk_ecdfs(xs, ys, [&](double lo, double hi, double fx, double fy) { area += std::abs(fx - fy) * (hi - lo); });
  return area;
}

namespace {

std::vector<double> smooth(const std::vector<double> &pmf, double eps) {
  std::vector<double> out(pmf.size());
  const double norm = 1.0 + eps * static_cast<double>(pmf.size());
  for (std::size_t i = 0; i < pmf.size(); ++i) out[i] = (pmf[i] + eps) / norm;
  return out;
}

std::vector<double> bin_pmf(std::span<const double> values, std::span<const double> edges) {
  const std::size_t bins = edges.size() - 1;
  std::vector<double> counts(bins, 0.0);
  for (double v : values) {
    std::size_t b;
    if (v <= edges.front()) b = 0;
    else if (v >= edges.back()) b = bins - 1;
    else b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin()) - 1;
    counts[b] += 1.0;
  }
  for (auto &c : counts) c /= static_cast<double>(values.size());
  return counts;
}

void check_pmfs(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw LengthMismatch("PMFs have different lengths");
  if (p.empty()) throw EmptySample("empty PMF");
}

}  // namespace

std::vector<double> HistogramPair::smoothed_p() const { return smooth(p, smoothing_epsilon); }
std::vector<double> HistogramPair::smoothed_q() const { return smooth(q, smoothing_epsilon); }

HistogramPair make_histogram_pair(std::span<const double> x, std::span<const double> y, std::size_t bins,
                                  double epsilon) {
  if (x.empty() || y.empty()) throw EmptySample("histogram of an empty sample");
  if (bins < 2) throw InvalidArgument("need at least two bins");
  const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
  const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
  const double lo = std::min(*xlo, *ylo);
  const double hi = std::max(*xhi, *yhi);
  if (lo == hi) {
    HistogramPair h;
    h.bin_edges = {lo, hi};
    h.p = {1.0};
    h.q = {1.0};
    h.smoothing_epsilon = epsilon;
    h.degenerate_range = true;
    return h;
  }
  std::vector<double> edges(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) edges[i] = lo + static_cast<double>(i) * width;
  edges.back() = hi;
  return make_histogram_pair(x, y, edges, epsilon);
}

HistogramPair make_histogram_pair(std::span<const double> x, std::span<const double> y,
                                  std::span<const double> edges, double epsilon) {
  if (x.empty() || y.empty()) throw EmptySample("histogram of an empty sample");
  if (edges.size() < 2) throw InvalidArgument("need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw InvalidArgument("bin edges must be strictly increasing");
  if (!(epsilon >= 0.0)) throw InvalidArgument("smoothing epsilon must be non-negative");
  HistogramPair h;
  h.bin_edges.assign(edges.begin(), edges.end());
  h.p = bin_pmf(x, edges);
  h.q = bin_pmf(y, edges);
  h.smoothing_epsilon = epsilon;
  return h;
}

HistogramPair make_category_pair(const CategoricalColumn &reference, const CategoricalColumn &current,
                                 double epsilon) {
  HistogramPair h;
  h.smoothing_epsilon = epsilon;
  std::unordered_map<std::string, std::size_t> slot;
  auto slot_of = [&](const std::string &label) {
    auto [it, inserted] = slot.try_emplace(label, h.categories.size());
    if (inserted) h.categories.push_back(label);
    return it->second;
  };
  for (const auto &label : reference.labels) slot_of(label);
  for (const auto &label : current.labels) slot_of(label);

  auto table = [&](const CategoricalColumn &col) {
    std::vector<double> freq(h.categories.size(), 0.0);
    double n = 0.0;
    for (std::size_t i = 0; i < col.size(); ++i) {
      if (col.missing[i]) continue;
      freq[slot.at(col.label_at(i))] += 1.0;
      n += 1.0;
    }
    if (n == 0.0) throw EmptySample("column '" + col.name + "' has no observed values");
    for (auto &f : freq) f /= n;
    return freq;
  };
  h.p = table(reference);
  h.q = table(current);
  return h;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  check_pmfs(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, sum);
}

double jsd(std::span<const double> p, std::span<const double> q) {
  check_pmfs(p, q);
  // Accumulate per bin over the pair so jsd(p,q) and jsd(q,p) add the same
  // terms in the same order.
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double mid = 0.5 * (p[i] + q[i]);
    double term = 0.0;
    if (p[i] > 0.0) term += p[i] * std::log2(p[i] / mid);
    if (q[i] > 0.0) term += q[i] * std::log2(q[i] / mid);
    sum += term;
  }
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

double psi(std::span<const double> p, std::span<const double> q) {
  check_pmfs(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == q[i]) continue;
    if (p[i] <= 0.0 || q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    sum += (p[i] - q[i]) * std::log(p[i] / q[i]);
  }
  return std::max(0.0, sum);
}

double tvd(std::span<const double> p, std::span<const double> q) {
  check_pmfs(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

double kl_divergence(const HistogramPair &h) { return kl_divergence(h.smoothed_p(), h.smoothed_q()); }
double jsd(const HistogramPair &h) { return jsd(h.smoothed_p(), h.smoothed_q()); }
double psi(const HistogramPair &h) { return psi(h.smoothed_p(), h.smoothed_q()); }
double tvd(const HistogramPair &h) { return tvd(h.p, h.q); }

double median_heuristic_from_distances(const Eigen::MatrixXd &d) {
  std::vector<double> upper;
  upper.reserve(static_cast<std::size_t>(d.rows() * (d.rows() - 1) / 2));
  for (Eigen::Index j = 1; j < d.cols(); ++j)
    for (Eigen::Index i = 0; i < j; ++i) upper.push_back(d(i, j));
  if (upper.empty()) return 0.0;
  std::sort(upper.begin(), upper.end());
  const double med = quantile_sorted<double>(upper, 0.5);
  if (med > 0.0) return med;
  const auto first_nonzero = std::upper_bound(upper.begin(), upper.end(), 0.0);
  if (first_nonzero == upper.end()) return 0.0;
  return quantile_sorted<double>(std::span<const double>(&*first_nonzero, static_cast<std::size_t>(upper.end() - first_nonzero)), 0.5);
}

PermutationResult permutation_test(PermutationMetric metric, const Eigen::MatrixXd &x, const Eigen::MatrixXd &y,
                                   std::size_t n_permutations, std::uint64_t seed, const MmdOptions &options) {
  detail::check_same_width(x, y);
  if (n_permutations < 99) throw InvalidArgument("permutation test needs at least 99 permutations");

  const Eigen::Index n = x.rows();
  const Eigen::Index m = y.rows();
  const Eigen::Index total = n + m;
  Eigen::MatrixXd pooled(total, x.cols());
  pooled << x, y;

  PermutationResult out;
  Eigen::MatrixXd weights = pairwise_distances(pooled);
  if (metric == PermutationMetric::mmd2) {
    const double sigma = options.bandwidth ? *options.bandwidth : median_heuristic_from_distances(weights);
    out.bandwidth = sigma;
    if (!(sigma > 0.0)) {
      out.statistic = 0.0;
      out.p_value = 1.0;
      return out;
    }
    const double gamma = 1.0 / (2.0 * sigma * sigma);
    weights = (-gamma * weights.array().square()).exp().matrix();
  }

  const Eigen::VectorXd row_totals = weights.rowwise().sum();
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);

  auto statistic = [&](const Eigen::VectorXd &in_x) {
    const Eigen::VectorXd wx = weights * in_x;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (Eigen::Index i = 0; i < total; ++i) {
      if (in_x(i) > 0.5) {
        sxx += wx(i);
      } else {
        sxy += wx(i);
        syy += row_totals(i) - wx(i);
      }
    }
    if (metric == PermutationMetric::energy) return 2.0 * sxy / (dn * dm) - sxx / (dn * dn) - syy / (dm * dm);
    if (options.unbiased)
      return (sxx - dn) / (dn * (dn - 1.0)) + (syy - dm) / (dm * (dm - 1.0)) - 2.0 * sxy / (dn * dm);
    return sxx / (dn * dn) + syy / (dm * dm) - 2.0 * sxy / (dn * dm);
  };

  Eigen::VectorXd labels = Eigen::VectorXd::Zero(total);
  labels.head(n).setOnes();
  out.statistic = statistic(labels);

  const double scale = std::max(1.0, weights.cwiseAbs().mean());
  const double cutoff = out.statistic - 1e-10 * scale;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  std::size_t at_least = 0;
  for (std::size_t b = 0; b < n_permutations; ++b) {
    shuffle(order, rng);
    labels.setZero();
    for (Eigen::Index i = 0; i < n; ++i) labels(order[static_cast<std::size_t>(i)]) = 1.0;
    if (statistic(labels) >= cutoff) ++at_least;
  }
  out.p_value = static_cast<double>(1 + at_least) / static_cast<double>(n_permutations + 1);
  if (metric == PermutationMetric::energy || !options.unbiased) out.statistic = std::max(0.0, out.statistic);
  return out;
}

const char *to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::warn: return "warn";
    case Verdict::fail: return "fail";
  }
  return "pass";
}

Verdict worst(Verdict a, Verdict b) { return static_cast<int>(a) >= static_cast<int>(b) ? a : b; }

Verdict Threshold::judge(double value) const {
  if (std::isnan(value)) return Verdict::pass;
  if (lower_is_worse) {
    if (value < fail) return Verdict::fail;
    if (value < warn) return Verdict::warn;
    return Verdict::pass;
  }
  if (value > fail) return Verdict::fail;
  if (value > warn) return Verdict::warn;
  return Verdict::pass;
}

const std::vector<std::string> &univariate_metric_names() {
  static const std::vector<std::string> names{"ks", "psi", "jsd", "kl", "tvd", "wasserstein1"};
  return names;
}

const std::vector<std::string> &multivariate_metric_names() {
  static const std::vector<std::string> names{"energy", "mmd2", "pca_recon"};
  return names;
}

void require_same_schema(const FeatureFrame &a, const FeatureFrame &b) {
  if (a.n_cols() != b.n_cols()) throw SchemaMismatch("frames have different column counts");
  for (std::size_t j = 0; j < a.n_cols(); ++j) {
    const auto &ca = a.columns()[j];
    const auto &cb = b.columns()[j];
    if (column_name(ca) != column_name(cb) || ca.index() != cb.index())
      throw SchemaMismatch("column " + std::to_string(j) + " differs: '" + column_name(ca) + "' vs '" +
                           column_name(cb) + "'");
  }
}

namespace {

DriftResult judged(std::optional<std::string> feature, const std::string &metric, double statistic,
                   std::optional<double> p_value, double judged_value, const DriftConfig &config) {
  DriftResult r;
  r.feature = std::move(feature);
  r.metric = metric;
  r.statistic = statistic;
  r.p_value = p_value;
  if (auto it = config.thresholds.find(metric); it != config.thresholds.end()) {
    r.thresholds = it->second;
    r.verdict = it->second.judge(judged_value);
  }
  return r;
}

DriftResult pmf_metric(const std::string &feature, const std::string &metric, const HistogramPair &h,
                       const DriftConfig &config) {
  double stat;
  if (metric == "psi") stat = psi(h);
  else if (metric == "jsd") stat = jsd(h);
  else if (metric == "kl") stat = kl_divergence(h);
  else if (metric == "tvd") stat = tvd(h);
  else throw InvalidArgument("metric '" + metric + "' does not apply to binned data");
  return judged(feature, metric, stat, std::nullopt, stat, config);
}

/// Rows where every selected numeric column is observed.
Eigen::MatrixXd complete_rows(const FeatureFrame &frame, const std::vector<std::string> &names) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < frame.n_rows(); ++i) {
    bool ok = true;
    for (const auto &name : names) ok = ok && !frame.numeric(name).missing[i];
    if (ok) keep.push_back(i);
  }
  return numeric_matrix(frame.select_rows(keep), names);
}

Eigen::MatrixXd subsample(const Eigen::MatrixXd &data, std::size_t max_rows, Rng &rng) {
  if (static_cast<std::size_t>(data.rows()) <= max_rows) return data;
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  shuffle(rows, rng);
  rows.resize(max_rows);
  std::sort(rows.begin(), rows.end());
  return data(rows, Eigen::all);
}

}  // namespace

std::vector<DriftResult> drift_scan(const FeatureFrame &reference, const FeatureFrame &current,
                                    const DriftConfig &config) {
  require_same_schema(reference, current);
  std::vector<DriftResult> results;

  for (std::size_t j = 0; j < reference.n_cols(); ++j) {
    const auto &ref_col = reference.columns()[j];
    const auto &cur_col = current.columns()[j];
    const std::string &name = column_name(ref_col);

    if (const auto *ref_num = std::get_if<NumericColumn>(&ref_col)) {
      const auto x = ref_num->observed();
      const auto y = std::get<NumericColumn>(cur_col).observed();
      if (x.empty() || y.empty()) continue;
      std::optional<HistogramPair> hist;
      for (const auto &metric : config.numeric_metrics) {
        if (metric == "ks") {
          const auto ks = ks_two_sample(x, y);
          results.push_back(judged(name, metric, ks.statistic, ks.p_value, ks.p_value, config));
        } else if (metric == "wasserstein1") {
          const double w = wasserstein1(x, y);
          results.push_back(judged(name, metric, w, std::nullopt, w, config));
        } else {
          if (!hist) hist = make_histogram_pair(x, y, config.bins, config.epsilon);
          results.push_back(pmf_metric(name, metric, *hist, config));
        }
      }
    } else {
      const auto &ref_cat = std::get<CategoricalColumn>(ref_col);
      const auto &cur_cat = std::get<CategoricalColumn>(cur_col);
      if (ref_cat.observed_count() == 0 || cur_cat.observed_count() == 0) continue;
      const auto table = make_category_pair(ref_cat, cur_cat, config.epsilon);
      for (const auto &metric : config.categorical_metrics) results.push_back(pmf_metric(name, metric, table, config));
    }
  }

  const auto numeric = reference.numeric_names();
  if (config.multivariate_metrics.empty() || numeric.empty()) return results;
  const Eigen::MatrixXd ref_raw = complete_rows(reference, numeric);
  const Eigen::MatrixXd cur_raw = complete_rows(current, numeric);
  if (ref_raw.rows() < 2 || cur_raw.rows() < 2) return results;

  const auto scaler = Standardizer<double>::fit(ref_raw);
  const Eigen::MatrixXd ref_std = scaler.apply(ref_raw);
  const Eigen::MatrixXd cur_std = scaler.apply(cur_raw);

  Rng sub_rng = derive_rng(config.seed, 3);
  const Eigen::MatrixXd ref_sub = subsample(ref_std, config.multivariate_max_rows, sub_rng);
  const Eigen::MatrixXd cur_sub = subsample(cur_std, config.multivariate_max_rows, sub_rng);

  for (const auto &metric : config.multivariate_metrics) {
    if (metric == "energy" || metric == "mmd2") {
      const auto kind = metric == "energy" ? PermutationMetric::energy : PermutationMetric::mmd2;
      const auto test = permutation_test(kind, ref_sub, cur_sub, config.permutations,
                                         derive_rng(config.seed, metric == "energy" ? 1 : 2)(), {});
      results.push_back(judged(std::nullopt, metric, test.statistic, test.p_value, test.p_value, config));
    } else if (metric == "pca_recon") {
      const auto pca = Pca<double>::fit(ref_std, config.variance_fraction);
      const double ref_err = pca.reconstruction_error(ref_std).mean();
      const double cur_err = pca.reconstruction_error(cur_std).mean();
      const double floor = 1e-12;
      double ratio = 1.0;
      if (ref_err > floor) ratio = cur_err / ref_err;
      else if (cur_err > floor) ratio = cur_err / floor;
      results.push_back(judged(std::nullopt, metric, ratio, std::nullopt, ratio, config));
    } else {
      throw InvalidArgument("unknown multivariate metric '" + metric + "'");
    }
  }
  return results;
}

std::vector<DriftResult> drift_scan(const ScoredDataset &reference, const ScoredDataset &current,
                                    const DriftConfig &config) {
  return drift_scan(reference.frame(), current.frame(), config);
}

}  // namespace valmon
