#include "valmon/monitor.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include "valmon/concept_drift.hpp"
#include "valmon/data_quality.hpp"
#include "valmon/external_model.hpp"
#include "valmon/metrics.hpp"
#include "valmon/outcome_analysis.hpp"
#include "valmon/uncertainty.hpp"

namespace valmon {

namespace {

struct Inputs {
  bool scored = false;
  ScoredDataset reference;
  ScoredDataset current;
  FeatureFrame reference_frame;
  FeatureFrame current_frame;
};

bool has_outcomes(const Schema &schema) {
  return schema.with_role(ColumnRole::target) && schema.with_role(ColumnRole::prediction);
}

Inputs load_inputs(const MonitorConfig &cfg) {
  Inputs in;
  in.scored = has_outcomes(cfg.schema);
  const auto ref = cfg.resolve(cfg.data.reference).string();
  const auto cur = cfg.resolve(cfg.data.current).string();
  if (in.scored) {
    in.reference = load_scored_csv(ref, cfg.schema, cfg.missing_tokens);
    in.current = load_scored_csv(cur, cfg.schema, cfg.missing_tokens);
    in.reference_frame = in.reference.frame();
    in.current_frame = in.current.frame();
  } else {
    in.reference_frame = load_frame_csv(ref, cfg.schema, cfg.missing_tokens);
    in.current_frame = load_frame_csv(cur, cfg.schema, cfg.missing_tokens);
  }
  return in;
}

std::string judge_message(const std::string &what, double value, const Threshold &t, Verdict v) {
  const std::string shown = std::isfinite(value) ? format_number(value) : std::string(value > 0 ? "inf" : "-inf");
  if (v == Verdict::pass)
    return what + " " + shown + " within thresholds";
  const double cut = v == Verdict::fail ? t.fail : t.warn;
  return what + " " + shown + (t.lower_is_worse ? " below " : " above ") + to_string(v) + " threshold " +
         format_number(cut);
}

// Adds threshold echo and verdict fields when a threshold is configured.
void judge_into(json &node, const std::optional<Threshold> &t, double value, const std::string &what,
                const std::string &subject) {
  node["thresholds"] = threshold_to_json(t);
  if (!t) return;
  const Verdict v = t->judge(value);
  attach_verdict(node, v, subject, judge_message(what, value, *t, v));
}

json outlier_entry(const OutlierScoreSet &set, const std::string &column, const QualityConfig &q) {
  std::size_t scored = 0;
  for (double s : set.scores)
    if (!std::isnan(s)) ++scored;
  const double rate = scored ? static_cast<double>(set.flagged_count()) / static_cast<double>(scored) : 0.0;
  json node{{"method", to_string(set.method)},
            {"column", column},
            {"scored_rows", scored},
            {"flagged_count", set.flagged_count()},
            {"flagged_fraction", rate},
            {"threshold", number_or_null(set.threshold)},
            {"warnings", set.warnings}};
  json params = json::object();
  for (const auto &[k, v] : set.params) params[k] = number_or_null(v);
  node["params"] = params;
  judge_into(node, q.outlier_rate, rate, "flagged fraction", std::string(to_string(set.method)) + ":" + column);
  return node;
}

json data_quality_section(const MonitorConfig &cfg, const Inputs &in) {
  const auto &frame = in.current_frame;
  const auto &q = cfg.quality;
  json section{{"status", "ok"}, {"rows", frame.n_rows()}};

  const auto profile = profile_missingness(frame);
  json columns = json::array();
  for (const auto &c : profile.columns) {
    json node{{"column", c.column}, {"missing_count", c.missing_count}, {"missing_fraction", c.missing_fraction}};
    judge_into(node, q.missingness, c.missing_fraction, "missing fraction", "missing:" + c.column);
    columns.push_back(std::move(node));
  }
  section["missingness"] = {{"columns", columns}, {"row_complete_fraction", profile.row_complete_fraction}};

  const auto violations = validate_rules(frame, cfg.schema);
  std::set<std::size_t> rows;
  json by_column = json::object();
  json examples = json::array();
  for (const auto &v : violations) {
    rows.insert(v.row);
    by_column[v.column] = by_column.value(v.column, 0) + 1;
    if (examples.size() < 20)
      examples.push_back({{"row", v.row}, {"column", v.column}, {"kind", to_string(v.kind)}, {"observed", v.observed}});
  }
  const double rate = frame.n_rows() ? static_cast<double>(rows.size()) / static_cast<double>(frame.n_rows()) : 0.0;
  json rules{{"violation_count", violations.size()},
             {"rows_affected", rows.size()},
             {"rate", rate},
             {"by_column", by_column},
             {"examples", examples}};
  judge_into(rules, q.violation_rate, rate, "violating row fraction", "rules");
  section["rules"] = rules;

  json outliers = json::array();
  const auto numeric = frame.numeric_names();
  for (auto method : q.outlier_methods) {
    if (method == OutlierMethod::zscore || method == OutlierMethod::iqr) {
      for (const auto &name : numeric) {
        try {
          const auto set = method == OutlierMethod::zscore ? outliers_zscore(frame.numeric(name), q.z_threshold)
                                                           : outliers_iqr(frame.numeric(name), q.iqr_multiplier);
          outliers.push_back(outlier_entry(set, name, q));
        } catch (const TooFewRows &e) {
          outliers.push_back({{"method", to_string(method)}, {"column", name}, {"status", "skipped"}, {"reason", e.what()}});
        }
      }
      continue;
    }
    // Joint detectors run on the rows where every numeric feature is observed.
    std::vector<std::size_t> complete;
    for (std::size_t i = 0; i < frame.n_rows(); ++i) {
      bool ok = true;
      for (const auto &name : numeric) ok = ok && !frame.numeric(name).is_missing(i);
      if (ok) complete.push_back(i);
    }
    json skipped{{"method", to_string(method)}, {"column", "*"}, {"status", "skipped"}};
    if (numeric.empty()) {
      skipped["reason"] = "no numeric features";
      outliers.push_back(skipped);
      continue;
    }
    const Eigen::MatrixXd x = numeric_matrix(frame.select_rows(complete), numeric);
    try {
      OutlierScoreSet set;
      if (method == OutlierMethod::lof) {
        if (complete.size() < 3) throw TooFewRows("LOF needs at least three complete rows");
        set = outliers_lof(x, std::min(q.lof_k, complete.size() - 1), q.lof_threshold);
      } else {
        if (complete.size() < 2) throw TooFewRows("PCA needs at least two complete rows");
        set = outliers_pca_mahalanobis(x, q.pca_variance_fraction, q.pca_alpha);
      }
      outliers.push_back(outlier_entry(set, "*", q));
    } catch (const TooFewRows &e) {
      skipped["reason"] = e.what();
      outliers.push_back(skipped);
    }
  }
  section["outliers"] = outliers;
  return section;
}

}  // namespace

std::string drift_subject(const DriftResult &r) {
  return (r.feature ? *r.feature : std::string("multivariate")) + ":" + r.metric;
}

json drift_result_to_json(const DriftResult &r) {
  json node{{"metric", r.metric}, {"statistic", number_or_null(r.statistic)}, {"p_value", optional_number(r.p_value)}};
  if (r.feature) node["feature"] = *r.feature;
  node["thresholds"] = threshold_to_json(r.thresholds);
  if (r.thresholds) {
    const bool pv = r.thresholds->lower_is_worse && r.p_value;
    const double judged = pv ? *r.p_value : r.statistic;
    attach_verdict(node, r.verdict, drift_subject(r),
                   judge_message(pv ? r.metric + " p-value" : r.metric, judged, *r.thresholds, r.verdict));
  }
  return node;
}

namespace {

json drift_section(const std::vector<DriftResult> &results) {
  json features = json::array(), multivariate = json::array();
  for (const auto &r : results) (r.feature ? features : multivariate).push_back(drift_result_to_json(r));
  return json{{"status", "ok"}, {"features", features}, {"multivariate", multivariate}};
}

json concept_section(const MonitorConfig &cfg, const Inputs &in, const std::vector<DriftResult> *evidence) {
  const auto diag = classify_drift(in.reference, in.current, cfg.concept_drift, evidence);
  json names = json::array();
  for (const auto &r : diag.input_drift_evidence)
    if (r.verdict == Verdict::fail) names.push_back(drift_subject(r));
  json section{{"status", "ok"},
               {"diagnosis", to_string(diag.verdict)},
               {"input_drift", diag.input_drift},
               {"input_drift_evidence", names},
               {"residual_test",
                {{"test_name", diag.residual_test.test_name},
                 {"statistic", number_or_null(diag.residual_test.statistic)},
                 {"p_value", number_or_null(diag.residual_test.p_value)}}},
               {"p_threshold", cfg.concept_drift.p_threshold},
               {"match",
                {{"k", cfg.concept_drift.k},
                 {"metric", to_string(cfg.concept_drift.match_metric)},
                 {"mean_match_distance", number_or_null(diag.mean_match_distance)},
                 {"distinct_matched_rows", diag.distinct_matched_rows}}},
               {"notes", diag.notes}};
  const bool concept_found = diag.verdict == DriftVerdict::concept_drift || diag.verdict == DriftVerdict::both;
  attach_verdict(section, concept_found ? Verdict::fail : Verdict::pass, "residual_distribution",
                 std::string("diagnosis ") + to_string(diag.verdict) + ", residual " + diag.residual_test.test_name +
                     " p-value " + format_number(diag.residual_test.p_value) + " vs threshold " +
                     format_number(cfg.concept_drift.p_threshold));
  return section;
}

bool probability_predictions(const ScoredDataset &ds) {
  return is_binary(ds.y_true()) && std::all_of(ds.y_pred().begin(), ds.y_pred().end(),
                                               [](double p) { return p >= 0.0 && p <= 1.0; });
}

json performance_section(const MonitorConfig &cfg, const Inputs &in) {
  const ErrorMetric metric = cfg.performance.metric.value_or(default_metric(in.reference));
  const auto ref = evaluate_metric(metric, in.reference.y_true(), in.reference.y_pred());
  const auto cur = evaluate_metric(metric, in.current.y_true(), in.current.y_pred());
  json section{{"status", "ok"},
               {"metric", to_string(metric)},
               {"reference", optional_number(ref)},
               {"current", optional_number(cur)},
               {"reference_rows", in.reference.n_rows()},
               {"current_rows", in.current.n_rows()}};
  std::optional<double> ratio;
  if (ref && cur) {
    const double num = metric == ErrorMetric::auc ? *ref : *cur;
    const double den = metric == ErrorMetric::auc ? *cur : *ref;
    ratio = den != 0.0 ? num / den : (num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  }
  section["ratio"] = optional_number(ratio);
  section["ratio_definition"] = metric == ErrorMetric::auc ? "reference / current" : "current / reference";
  if (ratio) {
    judge_into(section, cfg.performance.ratio, *ratio, std::string(to_string(metric)) + " ratio", to_string(metric));
  } else {
    section["thresholds"] = threshold_to_json(cfg.performance.ratio);
  }

  std::vector<ErrorMetric> extras;
  if (is_binary(in.reference.y_true()) && is_binary(in.current.y_true()))
    extras = {ErrorMetric::error_rate, ErrorMetric::auc};
  else
    extras = {ErrorMetric::mae, ErrorMetric::rmse};
  json all = json::object();
  for (auto m : extras)
    all[to_string(m)] = {
        {"reference", optional_number(evaluate_metric(m, in.reference.y_true(), in.reference.y_pred()))},
        {"current", optional_number(evaluate_metric(m, in.current.y_true(), in.current.y_pred()))}};
  section["metrics"] = all;
  return section;
}

json uncertainty_section(const MonitorConfig &cfg, const Inputs &in) {
  const auto &u = cfg.uncertainty;
  const bool probabilities = probability_predictions(in.current);
  if (!cfg.data.calibration && !probabilities)
    return skipped_section("not_configured", "no calibration dataset and predictions are not probabilities");
  json section{{"status", "ok"}};
  if (cfg.data.calibration) {
    const auto cal_ds = load_scored_csv(cfg.resolve(*cfg.data.calibration).string(), cfg.schema, cfg.missing_tokens);
    const auto cal = u.mode == ConformalMode::cqr ? cqr_fit(cal_ds, u.alpha) : conformal_fit(cal_ds, u.alpha);
    std::vector<Interval> intervals(in.current.n_rows());
    double width = 0.0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
      if (u.mode == ConformalMode::cqr) {
        if (!in.current.y_pred_lower() || !in.current.y_pred_upper())
          throw MissingQuantileColumns("current dataset lacks y_pred_lower/y_pred_upper");
        intervals[i] = cqr_interval(cal, (*in.current.y_pred_lower())[i], (*in.current.y_pred_upper())[i]);
      } else {
        intervals[i] = conformal_interval(cal, in.current.y_pred()[i]);
      }
      width += intervals[i].upper - intervals[i].lower;
    }
    json conformal{{"mode", to_string(cal.mode)},
                   {"alpha", cal.alpha},
                   {"q_hat", number_or_null(cal.q_hat)},
                   {"n_calibration", cal.n_calibration},
                   {"target_coverage", 1.0 - cal.alpha}};
    if (!intervals.empty()) {
      const double coverage = empirical_coverage(intervals, in.current.y_true());
      conformal["empirical_coverage"] = coverage;
      conformal["mean_width"] = width / static_cast<double>(intervals.size());
      judge_into(conformal, u.coverage_gap, (1.0 - cal.alpha) - coverage, "coverage shortfall", "coverage");
    }
    section["conformal"] = conformal;
  } else {
    section["conformal"] = skipped_section("not_configured", "no calibration dataset");
  }
  if (probabilities && in.current.n_rows() > 0) {
    const auto table = reliability_table(in.current.y_pred(), in.current.y_true(), u.reliability_bins);
    json bins = json::array();
    for (const auto &b : table.bins)
      bins.push_back({{"lower", b.lower},
                      {"upper", b.upper},
                      {"count", b.count},
                      {"mean_predicted", optional_number(b.mean_predicted)},
                      {"observed_rate", optional_number(b.observed_rate)}});
    section["probability_calibration"] = {{"brier_score", brier_score(in.current.y_pred(), in.current.y_true())},
                                          {"reliability", bins}};
  }
  return section;
}

json weakness_section(const MonitorConfig &cfg, const Inputs &in) {
  const auto &w = cfg.weakness;
  if (w.features.empty() && !w.kmeans_k && !cfg.data.train)
    return skipped_section("not_configured", "no segmentation features, clustering or training set configured");
  const ErrorMetric metric = w.metric.value_or(default_metric(in.current));
  json section{{"status", "ok"}, {"metric", to_string(metric)}, {"min_rows", w.min_rows}, {"bins", w.bins}};

  json regions = json::array();
  for (const auto &r : weak_region_scan(in.current, w.features, {w.bins, w.min_rows, metric})) {
    json node{{"feature", r.feature}, {"range", r.range}, {"rows", r.rows}, {"metric", r.metric}, {"lift", r.lift}};
    judge_into(node, w.lift, r.lift, "lift", r.feature + " " + r.range);
    regions.push_back(std::move(node));
  }
  section["regions"] = regions;

  if (w.kmeans_k) {
    const auto km = kmeans(in.current.frame(), *w.kmeans_k, cfg.seed, w.kmeans_max_iter);
    const auto table = segment_metrics(in.current, km.assignment, metric);
    json segments = json::array();
    for (const auto &row : table.rows)
      segments.push_back({{"segment", row.label},
                          {"rows", row.rows},
                          {"value", optional_number(row.value)},
                          {"lift", optional_number(row.lift)},
                          {"degenerate", row.degenerate}});
    json centroids = json::array();
    for (Eigen::Index c = 0; c < km.centroids.rows(); ++c) {
      json row = json::array();
      for (Eigen::Index j = 0; j < km.centroids.cols(); ++j) row.push_back(number_or_null(km.centroids(c, j)));
      centroids.push_back(row);
    }
    section["kmeans"] = {{"k", *w.kmeans_k},
                         {"features", in.current.frame().numeric_names()},
                         {"inertia", km.inertia},
                         {"iterations", km.iterations},
                         {"converged", km.converged},
                         {"centroids", centroids},
                         {"overall", optional_number(table.overall)},
                         {"segments", segments}};
  } else {
    section["kmeans"] = skipped_section("not_configured", "kmeans_k not set");
  }

  if (cfg.data.train) {
    const auto train = load_scored_csv(cfg.resolve(*cfg.data.train).string(), cfg.schema, cfg.missing_tokens);
    std::optional<FitGapBasis> basis;
    if (w.fit_gap_feature) basis = FitGapBasis{*w.fit_gap_feature, BinSpec::quantile(w.bins)};
    const auto gap = fit_gap(train, in.current, basis, metric, w.fit_gap);
    json rows = json::array();
    for (const auto &r : gap.rows)
      rows.push_back({{"segment", r.segment},
                      {"train_rows", r.train_rows},
                      {"test_rows", r.test_rows},
                      {"train_metric", optional_number(r.train_metric)},
                      {"test_metric", optional_number(r.test_metric)},
                      {"gap", optional_number(r.gap)},
                      {"flag", to_string(r.flag)}});
    section["fit_gap"] = {{"feature", w.fit_gap_feature ? json(*w.fit_gap_feature) : json(nullptr)},
                          {"overall_train", optional_number(gap.overall_train)},
                          {"overall_test", optional_number(gap.overall_test)},
                          {"overfit_fraction", gap.thresholds.overfit_fraction},
                          {"underfit_multiplier", gap.thresholds.underfit_multiplier},
                          {"segments", rows}};
  } else {
    section["fit_gap"] = skipped_section("not_configured", "no training dataset");
  }
  return section;
}

json robustness_section(const MonitorConfig &cfg, const Inputs &in) {
  const auto &r = cfg.robustness;
  if (!r.model) return skipped_section("not_configured", "no model command configured");
  const ExternalModel model(*r.model);
  json section{{"status", "ok"}, {"model_command", r.model->command}};

  const auto sens = perturbation_test(model, in.current_frame, r.noise_fraction, r.n_repeats, cfg.seed);
  json features = json::array();
  for (const auto &f : sens.features)
    features.push_back({{"feature", f.feature},
                        {"noise_scale", f.noise_scale},
                        {"noise_std", f.noise_std},
                        {"mean_abs_prediction_delta", f.mean_abs_prediction_delta},
                        {"p95_abs_delta", f.p95_abs_delta}});
  section["sensitivity"] = {{"n_repeats", sens.n_repeats}, {"features", features}};

  if (!r.irrelevant_features.empty()) {
    const auto inv = invariance_test(model, in.current_frame, r.irrelevant_features, r.invariance_mode, cfg.seed,
                                     r.tolerance);
    std::vector<std::size_t> shown(inv.violating_rows.begin(),
                                   inv.violating_rows.begin() +
                                       static_cast<std::ptrdiff_t>(std::min<std::size_t>(inv.violating_rows.size(), 50)));
    json node{{"mode", to_string(inv.mode)},
              {"features", inv.features},
              {"tolerance", inv.tolerance},
              {"max_abs_delta", inv.max_abs_delta},
              {"mean_abs_delta", inv.mean_abs_delta},
              {"violating_row_count", inv.violating_rows.size()},
              {"violating_rows", shown}};
    const Verdict v = inv.violating_rows.empty() ? Verdict::pass : Verdict::fail;
    attach_verdict(node, v, "invariance",
                   v == Verdict::pass ? "predictions unchanged within tolerance"
                                      : std::to_string(inv.violating_rows.size()) +
                                            " rows changed by more than the tolerance; max delta " +
                                            format_number(inv.max_abs_delta));
    section["invariance"] = node;
  } else {
    section["invariance"] = skipped_section("not_configured", "no irrelevant features declared");
  }
  return section;
}

std::optional<std::int64_t> mtime(const std::string &path) {
  struct stat st {};
  if (::stat(path.c_str(), &st) != 0) return std::nullopt;
  return static_cast<std::int64_t>(st.st_mtime);
}

}  // namespace

MonitoringReport run_monitor(const MonitorConfig &cfg, const RunOptions &options) {
  std::vector<std::string> requested = options.sections.empty() ? report_section_names() : options.sections;
  for (const auto &name : requested)
    if (std::find(report_section_names().begin(), report_section_names().end(), name) == report_section_names().end())
      throw InvalidArgument("unknown report section '" + name + "'");

  const Inputs in = load_inputs(cfg);
  MonitoringReport report;
  auto &doc = report.document;

  const json resolved = config_to_json(cfg);
  doc["config"] = resolved;
  doc["config_digest"] = hex64(fnv1a64(resolved.dump()));
  json datasets = json::object();
  datasets["reference"] = in.scored ? fingerprint(in.reference) : fingerprint(in.reference_frame);
  datasets["current"] = in.scored ? fingerprint(in.current) : fingerprint(in.current_frame);
  doc["datasets"] = datasets;

  std::string created_at;
  if (options.timestamp) {
    created_at = *options.timestamp;
  } else if (cfg.timestamp) {
    created_at = *cfg.timestamp;
  } else {
    std::int64_t newest = 0;
    for (const auto &p : {std::optional<std::string>(cfg.data.reference), std::optional<std::string>(cfg.data.current),
                          cfg.data.train, cfg.data.calibration})
      if (p)
        if (const auto t = mtime(cfg.resolve(*p).string())) newest = std::max(newest, *t);
    created_at = iso8601_utc(newest);
  }
  doc["created_at"] = created_at;
  doc["run_id"] = cfg.run_id ? *cfg.run_id
                             : "run-" + hex64(fnv1a64(created_at, fnv1a64(datasets.dump(), fnv1a64(resolved.dump()))));

  const auto wants = [&](const std::string &name) {
    return std::find(requested.begin(), requested.end(), name) != requested.end();
  };
  const std::string no_outcomes = "schema declares no target/prediction columns";

  json sections = json::object();
  for (const auto &name : report_section_names())
    sections[name] = wants(name) ? skipped_section("not_run", "aborted after an earlier section failed")
                                 : skipped_section("not_requested", "not part of this command");
  doc["complete"] = true;
  doc["error"] = nullptr;

  std::optional<std::vector<DriftResult>> drift_results;
  const std::vector<std::pair<std::string, std::function<json()>>> builders{
      {"data_quality", [&] { return data_quality_section(cfg, in); }},
      {"drift",
       [&] {
         drift_results = drift_scan(in.reference_frame, in.current_frame, cfg.drift);
         return drift_section(*drift_results);
       }},
      {"concept_drift",
       [&]() -> json {
         if (!in.scored) return skipped_section("not_configured", no_outcomes);
         if (!cfg.concept_enabled) return skipped_section("not_configured", "disabled in config");
         return concept_section(cfg, in, drift_results ? &*drift_results : nullptr);
       }},
      {"performance",
       [&]() -> json {
         if (!in.scored) return skipped_section("not_configured", no_outcomes);
         return performance_section(cfg, in);
       }},
      {"uncertainty",
       [&]() -> json {
         if (!in.scored) return skipped_section("not_configured", no_outcomes);
         return uncertainty_section(cfg, in);
       }},
      {"weakness",
       [&]() -> json {
         if (!in.scored) return skipped_section("not_configured", no_outcomes);
         return weakness_section(cfg, in);
       }},
      {"robustness", [&] { return robustness_section(cfg, in); }},
  };

  for (const auto &[name, build] : builders) {
    if (!wants(name)) continue;
    try {
      sections[name] = build();
    } catch (const Error &e) {
      sections[name] = json{{"status", "error"}, {"code", e.code()}, {"reason", e.what()}};
      doc["complete"] = false;
      doc["error"] = {{"section", name}, {"code", e.code()}, {"message", e.what()}};
      break;
    }
  }
  doc["sections"] = sections;
  finalize_report(report);
  return report;
}

}  // namespace valmon
