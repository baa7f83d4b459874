#include "valmon/config.hpp"

#include <algorithm>
#include <cmath>

#include "valmon/csv.hpp"

namespace valmon {

using nlohmann::json;

namespace {

std::string escape_pointer(const std::string &key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

std::string join(const std::vector<std::string> &items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Reader {
 public:
  Reader(const json &node, std::string pointer) : node_(node), pointer_(std::move(pointer)) {
    if (!node_.is_object()) throw ConfigError(pointer_.empty() ? "/" : pointer_, "expected an object");
  }

  std::string at(const std::string &key) const { return pointer_ + "/" + escape_pointer(key); }

  const json *get(const std::string &key) {
    known_.push_back(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  bool has_null(const std::string &key) {
    const auto *v = get(key);
    return v && v->is_null();
  }

  double number(const std::string &key, double fallback) {
    const auto *v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(at(key), "expected a number");
    return v->get<double>();
  }

  double probability(const std::string &key, double fallback, bool open = true) {
    const double v = number(key, fallback);
    if (open ? !(v > 0.0 && v < 1.0) : !(v >= 0.0 && v <= 1.0))
      throw ConfigError(at(key), open ? "must lie strictly between 0 and 1" : "must lie in [0, 1]");
    return v;
  }

  std::size_t count(const std::string &key, std::size_t fallback, std::size_t minimum = 0) {
    const auto *v = get(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
      throw ConfigError(at(key), "expected a non-negative integer");
    const auto n = v->get<std::size_t>();
    if (n < minimum) throw ConfigError(at(key), "must be at least " + std::to_string(minimum));
    return n;
  }

  bool boolean(const std::string &key, bool fallback) {
    const auto *v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
    return v->get<bool>();
  }

  std::optional<std::string> string(const std::string &key) {
    const auto *v = get(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_string()) throw ConfigError(at(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<std::string> strings(const std::string &key, std::vector<std::string> fallback) {
    const auto *v = get(key);
    if (!v) return fallback;
    if (!v->is_array()) throw ConfigError(at(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_string()) throw ConfigError(at(key) + "/" + std::to_string(i), "expected a string");
      out.push_back((*v)[i].get<std::string>());
    }
    return out;
  }

  /// Object child; nullptr when absent.
  std::optional<Reader> object(const std::string &key) {
    const auto *v = get(key);
    if (!v) return std::nullopt;
    return Reader(*v, at(key));
  }

  void finish() const {
    for (const auto &item : node_.items()) {
      if (std::find(known_.begin(), known_.end(), item.key()) == known_.end())
        throw ConfigError(at(item.key()), "unknown key; expected one of: " + join(known_));
    }
  }

 private:
  const json &node_;
  std::string pointer_;
  std::vector<std::string> known_;
};

template <typename Enum, typename Parse>
Enum parse_enum(Reader &r, const std::string &key, Enum fallback, Parse parse, const std::vector<std::string> &valid) {
  const auto text = r.string(key);
  if (!text) return fallback;
  try {
    return parse(*text);
  } catch (const Error &) {
    throw ConfigError(r.at(key), "unknown value '" + *text + "'; valid: " + join(valid));
  }
}

std::optional<ErrorMetric> parse_metric_key(Reader &r, const std::string &key) {
  const auto text = r.string(key);
  if (!text) return std::nullopt;
  try {
    return parse_error_metric(*text);
  } catch (const Error &) {
    throw ConfigError(r.at(key), "unknown metric '" + *text + "'; valid: mae, rmse, error_rate, auc");
  }
}

// Absent keeps `fallback`; null disables; {warn, fail} sets.
std::optional<Threshold> parse_threshold(Reader &parent, const std::string &key, std::optional<Threshold> fallback,
                                         bool lower_is_worse) {
  const auto *v = parent.get(key);
  if (!v) return fallback;
  if (v->is_null()) return std::nullopt;
  Reader r(*v, parent.at(key));
  const auto *warn = r.get("warn");
  const auto *fail = r.get("fail");
  r.finish();
  if (!warn || !warn->is_number()) throw ConfigError(r.at("warn"), "expected a number");
  if (!fail || !fail->is_number()) throw ConfigError(r.at("fail"), "expected a number");
  Threshold t{warn->get<double>(), fail->get<double>(), lower_is_worse};
  if (!lower_is_worse && t.warn > t.fail)
    throw ConfigError(r.at("warn"), "warn threshold " + format_number(t.warn) + " exceeds fail threshold " +
                                        format_number(t.fail));
  if (lower_is_worse && t.warn < t.fail)
    throw ConfigError(r.at("warn"), "warn p-value threshold " + format_number(t.warn) +
                                        " is below fail threshold " + format_number(t.fail));
  return t;
}

bool is_pvalue_metric(const std::string &metric) { return metric == "ks" || metric == "energy" || metric == "mmd2"; }

void check_names(Reader &r, const std::string &key, const std::vector<std::string> &names,
                 const std::vector<std::string> &valid) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (std::find(valid.begin(), valid.end(), names[i]) == valid.end())
      throw ConfigError(r.at(key) + "/" + std::to_string(i),
                        "unknown metric '" + names[i] + "'; valid: " + join(valid));
}

void check_features(Reader &r, const std::string &key, const std::vector<std::string> &features,
                    const Schema &schema, bool numeric_only) {
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto *spec = schema.find(features[i]);
    const std::string where = r.at(key) + "/" + std::to_string(i);
    if (!spec || spec->role != ColumnRole::feature)
      throw ConfigError(where, "'" + features[i] + "' is not a feature column in the schema");
    if (numeric_only && spec->kind != ColumnKind::numeric)
      throw ConfigError(where, "'" + features[i] + "' must be numeric");
  }
}

json read_json_file(const std::filesystem::path &path, const std::string &pointer) {
  std::string text;
  try {
    text = csv::read_file(path.string());
  } catch (const IoError &e) {
    throw ConfigError(pointer, e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigError(pointer, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

Schema parse_schema(const json &document, const std::string &pointer) {
  Reader root(document, pointer);
  const auto *columns = root.get("columns");
  root.finish();
  if (!columns || !columns->is_array() || columns->empty())
    throw ConfigError(root.at("columns"), "expected a nonempty array of column specs");
  std::vector<ColumnSpec> specs;
  for (std::size_t i = 0; i < columns->size(); ++i) {
    Reader c((*columns)[i], root.at("columns") + "/" + std::to_string(i));
    ColumnSpec spec;
    const auto name = c.string("name");
    if (!name) throw ConfigError(c.at("name"), "column name is required");
    spec.name = *name;
    spec.kind = parse_enum(c, "kind", ColumnKind::numeric, parse_column_kind, {"numeric", "categorical"});
    spec.role = parse_enum(c, "role", ColumnRole::feature, parse_column_role,
                           {"feature", "target", "prediction", "prediction_lower", "prediction_upper", "timestamp",
                            "split_tag"});
    if (const auto *range = c.get("valid_range")) {
      if (!range->is_array() || range->size() != 2 || !(*range)[0].is_number() || !(*range)[1].is_number())
        throw ConfigError(c.at("valid_range"), "expected [min, max]");
      spec.valid_range = std::make_pair((*range)[0].get<double>(), (*range)[1].get<double>());
    }
    if (c.get("valid_categories")) spec.valid_categories = c.strings("valid_categories", {});
    c.finish();
    specs.push_back(std::move(spec));
  }
  try {
    return Schema(std::move(specs));
  } catch (const SchemaError &e) {
    throw ConfigError(root.at("columns"), e.what());
  }
}

std::filesystem::path MonitorConfig::resolve(const std::string &path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

void MonitorConfig::set_seed(std::uint64_t value) {
  seed = value;
  drift.seed = value;
  concept_drift.drift.seed = value;
}

MonitorConfig parse_config(const json &document, const std::filesystem::path &base_dir) {
  MonitorConfig cfg;
  cfg.base_dir = base_dir;
  Reader root(document, "");

  const auto *schema = root.get("schema");
  if (!schema) throw ConfigError("/schema", "schema is required (inline object or path)");
  if (schema->is_string()) {
    cfg.schema_document = read_json_file(cfg.resolve(schema->get<std::string>()), "/schema");
  } else {
    cfg.schema_document = *schema;
  }
  cfg.schema = parse_schema(cfg.schema_document, "/schema");

  {
    auto data = root.object("data");
    if (!data) throw ConfigError("/data", "data paths are required");
    const auto reference = data->string("reference");
    const auto current = data->string("current");
    if (!reference) throw ConfigError(data->at("reference"), "reference dataset path is required");
    if (!current) throw ConfigError(data->at("current"), "current dataset path is required");
    cfg.data.reference = *reference;
    cfg.data.current = *current;
    cfg.data.train = data->string("train");
    cfg.data.calibration = data->string("calibration");
    if (data->get("missing_tokens")) {
      const auto tokens = data->strings("missing_tokens", {});
      cfg.missing_tokens = std::set<std::string>(tokens.begin(), tokens.end());
    }
    data->finish();
  }

  if (auto run = root.object("run")) {
    const double seed = run->number("seed", 0.0);
    if (seed < 0.0 || seed != std::floor(seed) || seed > 9007199254740992.0)
      throw ConfigError(run->at("seed"), "seed must be a non-negative integer");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.timestamp = run->string("timestamp");
    cfg.run_id = run->string("id");
    run->finish();
  }

  if (auto q = root.object("quality")) {
    auto &qc = cfg.quality;
    qc.missingness = parse_threshold(*q, "missingness", qc.missingness, false);
    qc.outlier_rate = parse_threshold(*q, "outlier_rate", qc.outlier_rate, false);
    qc.violation_rate = parse_threshold(*q, "violation_rate", qc.violation_rate, false);
    if (q->get("outlier_methods")) {
      const std::vector<std::string> valid{"zscore", "iqr", "lof", "pca_mahalanobis"};
      const auto names = q->strings("outlier_methods", {});
      check_names(*q, "outlier_methods", names, valid);
      qc.outlier_methods.clear();
      for (const auto &n : names)
        qc.outlier_methods.push_back(static_cast<OutlierMethod>(std::find(valid.begin(), valid.end(), n) - valid.begin()));
    }
    qc.z_threshold = q->number("z_threshold", qc.z_threshold);
    qc.iqr_multiplier = q->number("iqr_multiplier", qc.iqr_multiplier);
    qc.lof_k = q->count("lof_k", qc.lof_k, 1);
    qc.lof_threshold = q->number("lof_threshold", qc.lof_threshold);
    qc.pca_variance_fraction = q->probability("pca_variance_fraction", qc.pca_variance_fraction, false);
    qc.pca_alpha = q->probability("pca_alpha", qc.pca_alpha);
    q->finish();
  }

  if (auto d = root.object("drift")) {
    auto &dc = cfg.drift;
    dc.bins = d->count("bins", dc.bins, 2);
    dc.epsilon = d->number("epsilon", dc.epsilon);
    if (!(dc.epsilon > 0.0)) throw ConfigError(d->at("epsilon"), "must be positive");
    dc.numeric_metrics = d->strings("numeric_metrics", dc.numeric_metrics);
    check_names(*d, "numeric_metrics", dc.numeric_metrics, univariate_metric_names());
    dc.categorical_metrics = d->strings("categorical_metrics", dc.categorical_metrics);
    {
      std::vector<std::string> valid;
      for (const auto &m : univariate_metric_names())
        if (m != "ks" && m != "wasserstein1") valid.push_back(m);
      check_names(*d, "categorical_metrics", dc.categorical_metrics, valid);
    }
    dc.multivariate_metrics = d->strings("multivariate_metrics", dc.multivariate_metrics);
    check_names(*d, "multivariate_metrics", dc.multivariate_metrics, multivariate_metric_names());
    dc.permutations = d->count("permutations", dc.permutations, 99);
    dc.multivariate_max_rows = d->count("multivariate_max_rows", dc.multivariate_max_rows, 2);
    dc.variance_fraction = d->probability("variance_fraction", dc.variance_fraction, false);
    if (auto t = d->object("thresholds")) {
      std::vector<std::string> valid = univariate_metric_names();
      valid.insert(valid.end(), multivariate_metric_names().begin(), multivariate_metric_names().end());
      for (const auto &item : document.at("drift").at("thresholds").items()) {
        if (std::find(valid.begin(), valid.end(), item.key()) == valid.end())
          throw ConfigError(t->at(item.key()), "unknown metric '" + item.key() + "'; valid: " + join(valid));
        std::optional<Threshold> current;
        if (const auto it = dc.thresholds.find(item.key()); it != dc.thresholds.end()) current = it->second;
        const auto parsed = parse_threshold(*t, item.key(), current, is_pvalue_metric(item.key()));
        if (parsed) dc.thresholds[item.key()] = *parsed;
        else dc.thresholds.erase(item.key());
      }
      t->finish();
    }
    d->finish();
  }

  if (auto c = root.object("concept_drift")) {
    cfg.concept_enabled = c->boolean("enabled", cfg.concept_enabled);
    cfg.concept_drift.k = c->count("k", cfg.concept_drift.k, 1);
    cfg.concept_drift.match_metric = parse_enum(c.value(), "match_metric", cfg.concept_drift.match_metric, parse_match_metric,
                                          {"euclidean_standardized", "mahalanobis"});
    cfg.concept_drift.test = parse_enum(c.value(), "test", cfg.concept_drift.test, parse_residual_test, {"ks", "cvm"});
    cfg.concept_drift.p_threshold = c->probability("p_threshold", cfg.concept_drift.p_threshold);
    c->finish();
  }
  cfg.concept_drift.drift = cfg.drift;

  if (auto p = root.object("performance")) {
    cfg.performance.metric = parse_metric_key(*p, "metric");
    cfg.performance.ratio = parse_threshold(*p, "ratio", cfg.performance.ratio, false);
    p->finish();
  }

  if (auto u = root.object("uncertainty")) {
    cfg.uncertainty.alpha = u->probability("alpha", cfg.uncertainty.alpha);
    cfg.uncertainty.mode = parse_enum(
        u.value(), "mode", cfg.uncertainty.mode,
        [](std::string_view s) {
          if (s == "absolute_residual") return ConformalMode::absolute_residual;
          if (s == "cqr") return ConformalMode::cqr;
          throw InvalidArgument("mode");
        },
        {"absolute_residual", "cqr"});
    cfg.uncertainty.reliability_bins = u->count("reliability_bins", cfg.uncertainty.reliability_bins, 2);
    cfg.uncertainty.coverage_gap = parse_threshold(*u, "coverage_gap", cfg.uncertainty.coverage_gap, false);
    u->finish();
  }

  if (auto w = root.object("weakness")) {
    auto &wc = cfg.weakness;
    wc.features = w->strings("features", {});
    check_features(*w, "features", wc.features, cfg.schema, true);
    wc.bins = w->count("bins", wc.bins, 2);
    wc.min_rows = w->count("min_rows", wc.min_rows, 1);
    wc.metric = parse_metric_key(*w, "metric");
    if (w->get("kmeans_k") && !w->has_null("kmeans_k")) wc.kmeans_k = w->count("kmeans_k", 0, 1);
    wc.kmeans_max_iter = w->count("kmeans_max_iter", wc.kmeans_max_iter, 1);
    wc.lift = parse_threshold(*w, "lift", wc.lift, false);
    wc.fit_gap_feature = w->string("fit_gap_feature");
    if (wc.fit_gap_feature) {
      const auto *spec = cfg.schema.find(*wc.fit_gap_feature);
      if (!spec || spec->role != ColumnRole::feature || spec->kind != ColumnKind::numeric)
        throw ConfigError(w->at("fit_gap_feature"), "'" + *wc.fit_gap_feature + "' is not a numeric feature column");
    }
    wc.fit_gap.overfit_fraction = w->number("overfit_fraction", wc.fit_gap.overfit_fraction);
    wc.fit_gap.underfit_multiplier = w->number("underfit_multiplier", wc.fit_gap.underfit_multiplier);
    w->finish();
  }

  if (auto r = root.object("robustness")) {
    auto &rc = cfg.robustness;
    if (const auto command = r->string("model_command")) rc.model = ExternalModelSpec{*command, 60.0};
    const double timeout = r->number("timeout_seconds", 60.0);
    if (!(timeout > 0.0)) throw ConfigError(r->at("timeout_seconds"), "must be positive");
    if (rc.model) rc.model->timeout_seconds = timeout;
    rc.noise_fraction = r->number("noise_fraction", rc.noise_fraction);
    if (rc.noise_fraction < 0.0) throw ConfigError(r->at("noise_fraction"), "must be non-negative");
    rc.n_repeats = r->count("n_repeats", rc.n_repeats, 1);
    rc.irrelevant_features = r->strings("irrelevant_features", {});
    check_features(*r, "irrelevant_features", rc.irrelevant_features, cfg.schema, false);
    rc.invariance_mode = parse_enum(r.value(), "invariance_mode", rc.invariance_mode, parse_invariance_mode,
                                    {"permute", "constant"});
    rc.tolerance = r->number("tolerance", rc.tolerance);
    r->finish();
  }

  root.finish();
  cfg.set_seed(cfg.seed);
  return cfg;
}

MonitorConfig parse_config(const std::string &path) {
  const json document = read_json_file(path, "");
  auto base = std::filesystem::path(path).parent_path();
  return parse_config(document, base.empty() ? std::filesystem::path(".") : base);
}

json threshold_to_json(const std::optional<Threshold> &threshold) {
  if (!threshold) return nullptr;
  return json{{"warn", threshold->warn}, {"fail", threshold->fail}, {"lower_is_worse", threshold->lower_is_worse}};
}

json schema_to_json(const Schema &schema) {
  json columns = json::array();
  for (const auto &c : schema.columns()) {
    json col{{"name", c.name}, {"kind", to_string(c.kind)}, {"role", to_string(c.role)}};
    if (c.valid_range) col["valid_range"] = {c.valid_range->first, c.valid_range->second};
    if (c.valid_categories) col["valid_categories"] = *c.valid_categories;
    columns.push_back(std::move(col));
  }
  return json{{"columns", columns}};
}

json config_to_json(const MonitorConfig &cfg) {
  auto opt_string = [](const std::optional<std::string> &s) -> json { return s ? json(*s) : json(nullptr); };
  auto opt_metric = [](const std::optional<ErrorMetric> &m) -> json { return m ? json(to_string(*m)) : json(nullptr); };

  json out;
  out["schema"] = schema_to_json(cfg.schema);
  out["data"] = {{"reference", cfg.data.reference},
                 {"current", cfg.data.current},
                 {"train", opt_string(cfg.data.train)},
                 {"calibration", opt_string(cfg.data.calibration)},
                 {"missing_tokens", std::vector<std::string>(cfg.missing_tokens.begin(), cfg.missing_tokens.end())}};
  out["run"] = {{"seed", cfg.seed}, {"timestamp", opt_string(cfg.timestamp)}, {"id", opt_string(cfg.run_id)}};

  const auto &q = cfg.quality;
  std::vector<std::string> methods;
  for (auto m : q.outlier_methods) methods.push_back(to_string(m));
  out["quality"] = {{"missingness", threshold_to_json(q.missingness)},
                    {"outlier_rate", threshold_to_json(q.outlier_rate)},
                    {"violation_rate", threshold_to_json(q.violation_rate)},
                    {"outlier_methods", methods},
                    {"z_threshold", q.z_threshold},
                    {"iqr_multiplier", q.iqr_multiplier},
                    {"lof_k", q.lof_k},
                    {"lof_threshold", q.lof_threshold},
                    {"pca_variance_fraction", q.pca_variance_fraction},
                    {"pca_alpha", q.pca_alpha}};

  const auto &d = cfg.drift;
  json thresholds = json::object();
  for (const auto &[name, t] : d.thresholds) thresholds[name] = threshold_to_json(t);
  out["drift"] = {{"bins", d.bins},
                  {"epsilon", d.epsilon},
                  {"numeric_metrics", d.numeric_metrics},
                  {"categorical_metrics", d.categorical_metrics},
                  {"multivariate_metrics", d.multivariate_metrics},
                  {"permutations", d.permutations},
                  {"multivariate_max_rows", d.multivariate_max_rows},
                  {"variance_fraction", d.variance_fraction},
                  {"thresholds", thresholds}};

  out["concept_drift"] = {{"enabled", cfg.concept_enabled},
                          {"k", cfg.concept_drift.k},
                          {"match_metric", to_string(cfg.concept_drift.match_metric)},
                          {"test", to_string(cfg.concept_drift.test)},
                          {"p_threshold", cfg.concept_drift.p_threshold}};
  out["performance"] = {{"metric", opt_metric(cfg.performance.metric)},
                        {"ratio", threshold_to_json(cfg.performance.ratio)}};
  out["uncertainty"] = {{"alpha", cfg.uncertainty.alpha},
                        {"mode", to_string(cfg.uncertainty.mode)},
                        {"reliability_bins", cfg.uncertainty.reliability_bins},
                        {"coverage_gap", threshold_to_json(cfg.uncertainty.coverage_gap)}};
  const auto &w = cfg.weakness;
  out["weakness"] = {{"features", w.features},
                     {"bins", w.bins},
                     {"min_rows", w.min_rows},
                     {"metric", opt_metric(w.metric)},
                     {"kmeans_k", w.kmeans_k ? json(*w.kmeans_k) : json(nullptr)},
                     {"kmeans_max_iter", w.kmeans_max_iter},
                     {"lift", threshold_to_json(w.lift)},
                     {"fit_gap_feature", opt_string(w.fit_gap_feature)},
                     {"overfit_fraction", w.fit_gap.overfit_fraction},
                     {"underfit_multiplier", w.fit_gap.underfit_multiplier}};
  const auto &r = cfg.robustness;
  out["robustness"] = {{"model_command", r.model ? json(r.model->command) : json(nullptr)},
                       {"timeout_seconds", r.model ? r.model->timeout_seconds : 60.0},
                       {"noise_fraction", r.noise_fraction},
                       {"n_repeats", r.n_repeats},
                       {"irrelevant_features", r.irrelevant_features},
                       {"invariance_mode", to_string(r.invariance_mode)},
                       {"tolerance", r.tolerance}};
  return out;
}

}  // namespace valmon
