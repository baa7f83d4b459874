// Acceptance checks, one PASS/FAIL line per criterion.
//
//   valmon_acceptance            run every criterion
//   valmon_acceptance N [M ...]  run the listed criteria
//
// Exit status is 0 only when every selected criterion passes.
#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "valmon/concept_drift.hpp"
#include "valmon/data_quality.hpp"
#include "valmon/external_model.hpp"
#include "valmon/outcome_analysis.hpp"
#include "valmon/shift_metrics.hpp"
#include "valmon/uncertainty.hpp"

using namespace valmon;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char *name;
  double time_limit_seconds;
  std::function<Outcome()> run;
};

std::vector<double> normals(Rng &rng, std::size_t n, double mu = 0.0, double sd = 1.0) {
  std::vector<double> v(n);
  for (auto &x : v) x = mu + sd * standard_normal(rng);
  return v;
}

Eigen::MatrixXd as_column(const std::vector<double> &v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

FeatureFrame frame_of(std::vector<std::pair<std::string, std::vector<double>>> cols) {
  std::vector<Column> columns;
  for (auto &[name, values] : cols) columns.emplace_back(make_numeric(name, std::move(values)));
  return FeatureFrame(std::move(columns));
}

ScoredDataset scored(FeatureFrame frame, std::vector<double> y, std::vector<double> p) {
  ScoredDataset::Outcomes o;
  o.y_true = std::move(y);
  o.y_pred = std::move(p);
  return ScoredDataset(std::move(frame), std::move(o));
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Metric identities

Outcome metric_identities() {
  Rng rng = derive_rng(101, 0);
  double worst_identity = 0.0, worst_asym = 0.0, worst_bound = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = normals(rng, 60);
    const auto y = normals(rng, 45, rep % 4 == 0 ? 10.0 : 0.5);  // some disjoint supports
    const auto hxx = make_histogram_pair(x, x);
    const auto hxy = make_histogram_pair(x, y);
    const auto hyx = make_histogram_pair(y, x);
    const Eigen::MatrixXd mx = as_column(x), my = as_column(y);
    Eigen::MatrixXd bx(30, 3), by(25, 3);
    for (auto *m : {&bx, &by})
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = standard_normal(rng);
    const double identities[] = {ks_two_sample(x, x).statistic, tvd(hxx), jsd(hxx), psi(hxx), wasserstein1(x, x),
                                 energy_distance(bx, bx), mmd2(bx, bx)};
    for (double v : identities) worst_identity = std::max(worst_identity, std::abs(v));
    const double pairs[][2] = {{ks_two_sample(x, y).statistic, ks_two_sample(y, x).statistic},
                               {tvd(hxy), tvd(hyx)},
                               {jsd(hxy), jsd(hyx)},
                               {wasserstein1(x, y), wasserstein1(y, x)},
                               {energy_distance(bx, by), energy_distance(by, bx)},
                               {mmd2(bx, by), mmd2(by, bx)},
                               {energy_distance(mx, my), energy_distance(my, mx)}};
    for (const auto &p : pairs) worst_asym = std::max(worst_asym, std::abs(p[0] - p[1]));
    for (double v : {ks_two_sample(x, y).statistic, tvd(hxy), jsd(hxy)}) worst_bound = std::max(worst_bound, v);
  }
  Outcome o;
  o.pass = worst_identity == 0.0 && worst_asym <= 1e-12 && worst_bound <= 1.0;
  o.detail = "max identity value " + fmt(worst_identity) + ", max asymmetry " + fmt(worst_asym) +
             ", max bounded metric " + fmt(worst_bound);
  return o;
}

// ---------------------------------------------------------------------------
// 2. Brute-force oracles

double brute_ks(const std::vector<double> &x, const std::vector<double> &y) {
  double d = 0.0;
  auto ecdf = [](const std::vector<double> &s, double t) {
    std::size_t c = 0;
    for (double v : s) c += v <= t;
    return static_cast<double>(c) / static_cast<double>(s.size());
  };
  for (const auto *s : {&x, &y})
    for (double t : *s) d = std::max(d, std::abs(ecdf(x, t) - ecdf(y, t)));
  return d;
}

std::vector<double> mid_ranks(const std::vector<double> &pooled) {
  std::vector<double> r(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    double below = 0, equal = 0;
    for (double v : pooled) {
      below += v < pooled[i];
      equal += v == pooled[i];
    }
    r[i] = below + (equal + 1.0) / 2.0;
  }
  return r;
}

double brute_cvm(const std::vector<double> &x, const std::vector<double> &y) {
  std::vector<double> pooled = x;
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto r = mid_ranks(pooled);
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size()), big_n = n + m;
  std::vector<double> rx(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(x.size()));
  std::vector<double> ry(r.begin() + static_cast<std::ptrdiff_t>(x.size()), r.end());
  std::sort(rx.begin(), rx.end());
  std::sort(ry.begin(), ry.end());
  double u = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) u += n * std::pow(rx[i] - static_cast<double>(i + 1), 2);
  for (std::size_t j = 0; j < ry.size(); ++j) u += m * std::pow(ry[j] - static_cast<double>(j + 1), 2);
  return u / (n * m * big_n) - (4.0 * m * n - 1.0) / (6.0 * big_n);
}

Outcome brute_force_oracles() {
  Rng rng = derive_rng(202, 0);
  int ks_mismatch = 0;
  double w_err = 0.0, cvm_err = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto n = 1 + uniform_index(rng, 20), m = 1 + uniform_index(rng, 20);
    std::vector<double> x(n), y(m);
    // Rounded draws so ties within and across samples occur.
    for (auto &v : x) v = std::round(standard_normal(rng) * 4.0) / 4.0;
    for (auto &v : y) v = std::round((standard_normal(rng) + 0.3) * 4.0) / 4.0;
    if (ks_two_sample(x, y).statistic != brute_ks(x, y)) ++ks_mismatch;

    std::vector<double> a = normals(rng, n), b = normals(rng, n, 0.5);
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double pair_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) pair_mean += std::abs(sa[i] - sb[i]);
    pair_mean /= static_cast<double>(n);
    w_err = std::max(w_err, std::abs(wasserstein1(a, b) - pair_mean));

    const auto cn = 1 + uniform_index(rng, 10), cm = 1 + uniform_index(rng, 10);
    std::vector<double> cx(cn), cy(cm);
    for (auto &v : cx) v = std::round(standard_normal(rng) * 2.0) / 2.0;
    for (auto &v : cy) v = std::round(standard_normal(rng) * 2.0) / 2.0;
    const double ref = brute_cvm(cx, cy);
    cvm_err = std::max(cvm_err, std::abs(cvm_statistic(cx, cy) - ref) / std::max(1.0, std::abs(ref)));
  }
  Outcome o;
  o.pass = ks_mismatch == 0 && w_err <= 1e-12 && cvm_err <= 1e-12;
  o.detail = "KS mismatches " + std::to_string(ks_mismatch) + "/200, W1 max error " + fmt(w_err) +
             ", CvM max rel error " + fmt(cvm_err);
  return o;
}

// ---------------------------------------------------------------------------
// 3. Conformal coverage

ScoredDataset heteroscedastic(Rng &rng, std::size_t n) {
  std::vector<double> x(n), y(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = 4.0 * uniform01(rng) - 2.0;
    p[i] = std::sin(x[i]) + 0.5 * x[i];
    y[i] = p[i] + (0.1 + 0.5 * std::abs(x[i])) * standard_normal(rng);
  }
  return scored(frame_of({{"x", x}}), y, p);
}

Outcome conformal_coverage() {
  double total = 0.0;
  bool monotone = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = derive_rng(303, seed);
    const auto cal = heteroscedastic(rng, 1000);
    const auto test = heteroscedastic(rng, 10000);
    const auto fit = conformal_fit(cal, 0.1);
    std::vector<Interval> iv;
    iv.reserve(test.n_rows());
    for (double p : test.y_pred()) iv.push_back(conformal_interval(fit, p));
    total += empirical_coverage(iv, test.y_true());
    double prev = std::numeric_limits<double>::infinity();
    for (double alpha = 0.02; alpha < 0.5; alpha += 0.02) {
      const double q = conformal_fit(cal, alpha).q_hat;
      monotone = monotone && q <= prev;
      prev = q;
    }
  }
  const double mean_cov = total / 20.0;
  return {mean_cov >= 0.89 && mean_cov <= 0.93 && monotone,
          "mean coverage " + fmt(mean_cov) + " over 20 seeds, q_hat monotone in alpha: " +
              (monotone ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 4. Multivariate shift power and level

Outcome multivariate_power() {
  constexpr int kSeeds = 50;
  constexpr double kAlpha = 0.01;
  int power_energy = 0, power_mmd = 0, null_energy = 0, null_mmd = 0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng = derive_rng(404, static_cast<std::uint64_t>(seed));
    Eigen::MatrixXd x(200, 5), y(200, 5), z(200, 5);
    for (auto *m : {&x, &y, &z})
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = standard_normal(rng);
    y.col(0).array() += 1.5;
    const auto s = static_cast<std::uint64_t>(seed);
    power_energy += permutation_pvalue(PermutationMetric::energy, x, y, 199, s) <= kAlpha;
    power_mmd += permutation_pvalue(PermutationMetric::mmd2, x, y, 199, s) <= kAlpha;
    null_energy += permutation_pvalue(PermutationMetric::energy, x, z, 199, s) <= kAlpha;
    null_mmd += permutation_pvalue(PermutationMetric::mmd2, x, z, 199, s) <= kAlpha;
  }
  const bool pass = power_energy >= 45 && power_mmd >= 45 && null_energy <= 2 && null_mmd <= 2;
  return {pass, "rejections at p<=0.01: shift energy " + std::to_string(power_energy) + "/50, mmd2 " +
                    std::to_string(power_mmd) + "/50; null energy " + std::to_string(null_energy) + "/50, mmd2 " +
                    std::to_string(null_mmd) + "/50"};
}

// ---------------------------------------------------------------------------
// 5. Concept-drift discrimination

ScoredDataset concept_generator(Rng &rng, std::size_t n, double x1_shift, double function_shift) {
  std::vector<double> x1(n), x2(n), y(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = standard_normal(rng) + x1_shift;
    x2[i] = standard_normal(rng);
    const double truth = 2.0 * x1[i] - x2[i] + 0.25 * x1[i] * x1[i];
    p[i] = 2.0 * x1[i] - x2[i];  // misses the quadratic term
    y[i] = truth + standard_normal(rng) + function_shift;
  }
  return scored(frame_of({{"x1", x1}, {"x2", x2}}), y, p);
}

Outcome concept_discrimination() {
  ConceptDriftConfig cfg;
  cfg.drift.multivariate_metrics = {};
  int covariate_input = 0, covariate_false_concept = 0, changed_concept = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng = derive_rng(505, seed);
    const auto ref = concept_generator(rng, 1000, 0.0, 0.0);
    const auto covariate = concept_generator(rng, 500, 0.75, 0.0);
    const auto changed = concept_generator(rng, 500, 0.0, 1.0);
    cfg.drift.seed = seed;
    const auto a = classify_drift(ref, covariate, cfg);
    covariate_input += a.verdict == DriftVerdict::input_drift;
    covariate_false_concept += a.verdict == DriftVerdict::concept_drift || a.verdict == DriftVerdict::both;
    changed_concept += classify_drift(ref, changed, cfg).verdict == DriftVerdict::concept_drift;
  }
  return {covariate_input >= 45 && changed_concept >= 45 && covariate_false_concept <= 2,
          "covariate shift -> input_drift " + std::to_string(covariate_input) +
              "/50, changed function -> concept_drift " + std::to_string(changed_concept) +
              "/50, false concept under covariate shift " + std::to_string(covariate_false_concept) + "/50"};
}

// ---------------------------------------------------------------------------
// 6. Outlier detectors

Outcome outlier_detectors() {
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng = derive_rng(606, seed);
    Eigen::MatrixXd m(5000, 4);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double a = standard_normal(rng), b = standard_normal(rng), c = standard_normal(rng),
                   d = standard_normal(rng);
      m.row(i) << 3.0 * a, a + 0.5 * b, 2.0 * c - b, 0.2 * d + c;
    }
    const auto s = outliers_pca_mahalanobis(m, 0.95, 0.01);
    const double rate = static_cast<double>(s.flagged_count()) / 5000.0;
    lo = std::min(lo, rate);
    hi = std::max(hi, rate);
  }

  Eigen::MatrixXd grid(501, 2);
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 20; ++j) grid.row(i * 20 + j) << i, j;
  grid.row(500) << 60.0, 45.0;
  const auto lof = outliers_lof(grid, 20);
  const auto top = std::max_element(lof.scores.begin(), lof.scores.end()) - lof.scores.begin();
  double runner_up = 0.0;
  for (std::size_t i = 0; i < 500; ++i) runner_up = std::max(runner_up, lof.scores[i]);

  return {lo >= 0.005 && hi <= 0.02 && top == 500,
          "pca_mahalanobis flag rate in [" + fmt(lo) + ", " + fmt(hi) + "] over 5 seeds; LOF top row " +
              std::to_string(top) + " score " + fmt(lof.scores[500]) + " vs grid max " + fmt(runner_up)};
}

// ---------------------------------------------------------------------------
// 7. Weakness scan

Outcome weakness_scan() {
  int hits = 0;
  double min_lift = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = derive_rng(707, seed);
    constexpr std::size_t n = 2000;
    std::vector<std::vector<double>> f(5, std::vector<double>(n));
    std::vector<double> y(n), p(n);
    const std::size_t planted = seed % 5;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto &col : f) col[i] = uniform01(rng);
      y[i] = f[0][i] + f[1][i];
      p[i] = y[i] + (f[planted][i] > 0.8 ? 5.0 : 1.0) * 0.1 * standard_normal(rng);
    }
    std::vector<std::pair<std::string, std::vector<double>>> cols;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < 5; ++j) {
      names.push_back("f" + std::to_string(j));
      cols.emplace_back(names.back(), f[j]);
    }
    const auto regions = weak_region_scan(scored(frame_of(std::move(cols)), y, p), names);
    if (regions.empty()) continue;
    const auto &top = regions.front();
    // Top quintile bin label is "[q80, max]".
    const bool right_bin = top.range.size() > 1 && top.range[0] == '[' && std::stod(top.range.substr(1)) > 0.75;
    if (top.feature == names[planted] && right_bin && top.lift > 2.0) ++hits;
    min_lift = std::min(min_lift, top.lift);
  }
  return {hits >= 19, "planted region ranked first with lift > 2 in " + std::to_string(hits) +
                          "/20 seeds (min top lift " + fmt(min_lift) + ")"};
}

// ---------------------------------------------------------------------------
// 8. End-to-end CLI

int run_cli(const std::string &args) {
  const std::string cmd = std::string(VALMON_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_verdicts(const nlohmann::json &node) {
  std::size_t n = 0;
  if (node.is_object()) {
    if (auto it = node.find("verdict"); it != node.end() && (*it == "warn" || *it == "fail")) ++n;
    for (const auto &item : node.items()) n += count_verdicts(item.value());
  } else if (node.is_array()) {
    for (const auto &c : node) n += count_verdicts(c);
  }
  return n;
}

Outcome end_to_end() {
  const fs::path fixtures = VALMON_E2E_FIXTURES;
  const fs::path out = fs::temp_directory_path() / ("valmon_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(out);
  std::ostringstream detail;
  bool pass = true;

  const std::map<std::string, int> expected{{"clean", 0}, {"warn", 3}, {"fail", 4}};
  for (const auto &[name, code] : expected) {
    const auto cfg = (fixtures / (name + ".json")).string();
    const auto a = out / (name + "_a.json"), b = out / (name + "_b.json");
    const int ca = run_cli("monitor --config " + cfg + " --out " + a.string());
    const int cb = run_cli("monitor --config " + cfg + " --out " + b.string());
    const auto ja = slurp(a), jb = slurp(b);
    const bool identical = !ja.empty() && ja == jb;
    std::size_t alerts = 0, verdicts = 0;
    try {
      const auto doc = nlohmann::json::parse(ja);
      alerts = doc.at("alerts").size();
      verdicts = count_verdicts(doc.at("sections"));
    } catch (const std::exception &) {
      verdicts = alerts + 1;
    }
    const bool ok = ca == code && cb == code && identical && alerts == verdicts;
    pass = pass && ok;
    detail << name << ": exit " << ca << "/" << cb << " (want " << code << "), "
           << (identical ? "identical" : "DIFFERENT") << ", alerts " << alerts << " verdicts " << verdicts << "; ";
  }
  fs::remove_all(out);
  auto text = detail.str();
  text.resize(text.size() - 2);
  return {pass, text};
}

// ---------------------------------------------------------------------------
// 9. External model protocol

Outcome external_protocol() {
  std::vector<double> ids(257);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<double>((i * 73) % 257) + 0.125;
  std::vector<double> other(ids.size(), 1.0);
  const auto frame = frame_of({{"other", other}, {"id", ids}});
  const std::string model = VALMON_FIXTURE_MODEL;

  bool round_trip = false;
  try {
    round_trip = ExternalModel({model + " identity id", 10.0}).predict(frame) == ids;
  } catch (const std::exception &) {
  }
  auto kind_of = [&](const std::string &args, double timeout) -> std::string {
    try {
      score_external({model + " " + args, timeout}, frame);
    } catch (const ModelProtocolError &e) {
      return to_string(e.kind());
    } catch (const std::exception &e) {
      return std::string("other: ") + e.what();
    }
    return "none";
  };
  const auto malformed = kind_of("malformed", 10.0);
  const auto t0 = std::chrono::steady_clock::now();
  const auto timeout = kind_of("sleep 30", 1.0);
  const double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {round_trip && malformed == "parse" && timeout == "timeout" && waited < 5.0,
          std::string("identity round trip ") + (round_trip ? "ok" : "FAILED") + ", malformed -> " + malformed +
              ", sleep -> " + timeout + " after " + fmt(waited) + " s"};
}

}  // namespace

int main(int argc, char **argv) {
  const std::vector<Criterion> criteria{
      {1, "metric identities", 1.0, metric_identities},
      {2, "brute-force oracle equivalence", 10.0, brute_force_oracles},
      {3, "conformal coverage", 30.0, conformal_coverage},
      {4, "multivariate shift power/level", 120.0, multivariate_power},
      {5, "concept-drift discrimination", 120.0, concept_discrimination},
      {6, "outlier detectors", 30.0, outlier_detectors},
      {7, "weakness scan", 30.0, weakness_scan},
      {8, "end-to-end determinism and contract", 30.0, end_to_end},
      {9, "external model protocol", 10.0, external_protocol},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto &c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.time_limit_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("criterion %d [%s] %s: %s (%.2f s, limit %.0f s%s)\n", c.id, pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs, c.time_limit_seconds, in_time ? "" : ", TOO SLOW");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
