#include "valmon/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace valmon {

const std::vector<std::string> &report_section_names() {
  static const std::vector<std::string> names{"data_quality", "drift",    "concept_drift", "performance",
                                              "uncertainty",  "weakness", "robustness"};
  return names;
}

json verdict_fields(Verdict verdict, const std::string &subject, const std::string &message) {
  return json{{"verdict", to_string(verdict)}, {"subject", subject}, {"message", message}};
}

void attach_verdict(json &node, Verdict verdict, const std::string &subject, const std::string &message) {
  node["verdict"] = to_string(verdict);
  node["subject"] = subject;
  node["message"] = message;
}

namespace {

void walk(const std::string &section, const json &node, std::vector<Alert> &out) {
  if (node.is_object()) {
    if (const auto it = node.find("verdict"); it != node.end() && it->is_string()) {
      const auto v = it->get<std::string>();
      if (v == "warn" || v == "fail") {
        Alert a;
        a.section = section;
        a.severity = v == "fail" ? Verdict::fail : Verdict::warn;
        a.subject = node.value("subject", std::string());
        a.message = node.value("message", std::string());
        out.push_back(std::move(a));
      }
    }
    for (const auto &item : node.items()) walk(section, item.value(), out);
  } else if (node.is_array()) {
    for (const auto &child : node) walk(section, child, out);
  }
}

}  // namespace

std::vector<Alert> collect_alerts(const std::string &section, const json &node) {
  std::vector<Alert> out;
  walk(section, node, out);
  return out;
}

json alert_to_json(const Alert &alert) {
  return json{{"section", alert.section},
              {"subject", alert.subject},
              {"severity", to_string(alert.severity)},
              {"message", alert.message}};
}

json skipped_section(const std::string &status, const std::string &reason) {
  return json{{"status", status}, {"reason", reason}};
}

std::vector<Alert> MonitoringReport::alerts() const {
  std::vector<Alert> out;
  const auto it = document.find("alerts");
  if (it == document.end()) return out;
  for (const auto &a : *it) {
    out.push_back({a.value("section", std::string()), a.value("subject", std::string()),
                   a.value("severity", std::string()) == "fail" ? Verdict::fail : Verdict::warn,
                   a.value("message", std::string())});
  }
  return out;
}

Verdict MonitoringReport::status() const {
  Verdict v = Verdict::pass;
  for (const auto &a : alerts()) v = worst(v, a.severity);
  return v;
}

bool MonitoringReport::complete() const { return document.value("complete", true); }

void finalize_report(MonitoringReport &report) {
  json alerts = json::array();
  if (const auto it = report.document.find("sections"); it != report.document.end()) {
    // Fixed section order first, then anything else in key order.
    std::vector<std::string> order = report_section_names();
    for (const auto &item : it->items())
      if (std::find(order.begin(), order.end(), item.key()) == order.end()) order.push_back(item.key());
    for (const auto &name : order) {
      if (!it->contains(name)) continue;
      for (const auto &a : collect_alerts(name, (*it)[name])) alerts.push_back(alert_to_json(a));
    }
  }
  report.document["alerts"] = alerts;
  report.document["status"] = to_string(report.status());
}

int exit_code(const MonitoringReport &report) {
  if (!report.complete()) return 1;
  switch (report.status()) {
    case Verdict::fail: return 4;
    case Verdict::warn: return 3;
    case Verdict::pass: break;
  }
  return 0;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::json;
  if (text == "text") return ReportFormat::text;
  throw InvalidArgument("report format must be json or text, got '" + std::string(text) + "'");
}

namespace {

std::string upper(std::string s) {
  for (auto &c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string brief(const json &v) {
  if (v.is_number_float()) return format_number(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void section_summary(std::ostringstream &os, const std::string &name, const json &s) {
  os << "  " << name << ": ";
  if (s.contains("status") && s["status"].is_string() && s["status"] != "ok") {
    os << s["status"].get<std::string>();
    if (s.contains("reason")) os << " (" << s["reason"].get<std::string>() << ")";
    os << "\n";
    return;
  }
  if (name == "drift") {
    std::size_t n = s.contains("features") ? s["features"].size() : 0;
    std::size_t m = s.contains("multivariate") ? s["multivariate"].size() : 0;
    os << n << " per-feature results, " << m << " multivariate results";
  } else if (name == "concept_drift") {
    os << "diagnosis " << s.value("diagnosis", std::string("?"));
    if (s.contains("residual_test"))
      os << ", residual " << s["residual_test"].value("test_name", std::string()) << " p = "
         << brief(s["residual_test"]["p_value"]);
  } else if (name == "performance") {
    os << s.value("metric", std::string("?")) << " reference " << brief(s["reference"]) << ", current "
       << brief(s["current"]);
  } else if (name == "uncertainty" && s.contains("conformal")) {
    os << "coverage " << brief(s["conformal"]["empirical_coverage"]) << " at alpha "
       << brief(s["conformal"]["alpha"]);
  } else if (name == "weakness" && s.contains("regions")) {
    os << s["regions"].size() << " regions";
    if (!s["regions"].empty())
      os << ", top " << s["regions"][0].value("feature", std::string()) << " "
         << s["regions"][0].value("range", std::string()) << " lift " << brief(s["regions"][0]["lift"]);
  } else if (name == "data_quality" && s.contains("missingness")) {
    os << "row complete fraction " << brief(s["missingness"]["row_complete_fraction"]);
  } else {
    os << "ok";
  }
  os << "\n";
}

}  // namespace

std::string render_report(const MonitoringReport &report, ReportFormat format) {
  if (format == ReportFormat::json) return report.document.dump(2) + "\n";
  const auto &doc = report.document;
  std::ostringstream os;
  const auto alerts = report.alerts();
  if (alerts.empty()) {
    os << "ALERTS: none\n";
  } else {
    os << "ALERTS: " << alerts.size() << "\n";
    for (const auto &a : alerts)
      os << "  [" << upper(to_string(a.severity)) << "] " << a.section << " / " << a.subject << ": " << a.message
         << "\n";
  }
  os << "\n";
  os << "run: " << doc.value("run_id", std::string("?")) << "\n";
  os << "created_at: " << doc.value("created_at", std::string("?")) << "\n";
  os << "status: " << upper(to_string(report.status())) << (report.complete() ? "" : " (incomplete)") << "\n";
  if (doc.contains("error") && !doc["error"].is_null())
    os << "error: " << doc["error"].value("code", std::string()) << ": " << doc["error"].value("message", std::string())
       << "\n";
  if (doc.contains("sections")) {
    os << "sections:\n";
    std::vector<std::string> order = report_section_names();
    for (const auto &item : doc["sections"].items())
      if (std::find(order.begin(), order.end(), item.key()) == order.end()) order.push_back(item.key());
    for (const auto &name : order)
      if (doc["sections"].contains(name)) section_summary(os, name, doc["sections"][name]);
  }
  return os.str();
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t state) {
  for (unsigned char c : data) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace {

std::uint64_t hash_values(const std::vector<double> &values, const std::vector<bool> *missing) {
  std::uint64_t h = fnv1a64("");
  for (std::size_t i = 0; i < values.size(); ++i) {
    h = fnv1a64(missing && (*missing)[i] ? std::string_view("\x01") : std::string_view(format_number(values[i])), h);
    h = fnv1a64("\x1f", h);
  }
  return h;
}

}  // namespace

json fingerprint(const FeatureFrame &frame) {
  json columns = json::object();
  for (const auto &col : frame.columns()) {
    std::uint64_t h = fnv1a64("");
    if (const auto *num = std::get_if<NumericColumn>(&col)) {
      h = hash_values(num->values, &num->missing);
    } else {
      const auto &cat = std::get<CategoricalColumn>(col);
      for (std::size_t i = 0; i < cat.size(); ++i) {
        h = fnv1a64(cat.is_missing(i) ? std::string("\x01") : cat.label_at(i), h);
        h = fnv1a64("\x1f", h);
      }
    }
    columns[column_name(col)] = hex64(h);
  }
  return json{{"rows", frame.n_rows()}, {"column_hashes", columns}};
}

json fingerprint(const ScoredDataset &ds) {
  json out = fingerprint(ds.frame());
  out["column_hashes"]["<y_true>"] = hex64(hash_values(ds.y_true(), nullptr));
  out["column_hashes"]["<y_pred>"] = hex64(hash_values(ds.y_pred(), nullptr));
  if (ds.y_pred_lower()) out["column_hashes"]["<y_pred_lower>"] = hex64(hash_values(*ds.y_pred_lower(), nullptr));
  if (ds.y_pred_upper()) out["column_hashes"]["<y_pred_upper>"] = hex64(hash_values(*ds.y_pred_upper(), nullptr));
  return out;
}

std::string iso8601_utc(std::int64_t seconds) {
  // Civil date from days since 1970-01-01 (Howard Hinnant's algorithm).
  std::int64_t days = seconds >= 0 ? seconds / 86400 : (seconds - 86399) / 86400;
  const std::int64_t rem = seconds - days * 86400;
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const auto doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600), static_cast<long long>(rem % 3600 / 60),
                static_cast<long long>(rem % 60));
  return buf;
}

json number_or_null(double value) { return std::isfinite(value) ? json(value) : json(nullptr); }

json optional_number(const std::optional<double> &value) { return value ? number_or_null(*value) : json(nullptr); }

}  // namespace valmon
