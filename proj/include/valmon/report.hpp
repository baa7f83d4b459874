#pragma once

// Report document helpers: verdict nodes, alert collection, fingerprints,
// rendering and the exit-status contract.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "valmon/data_model.hpp"
#include "valmon/shift_metrics.hpp"

namespace valmon {

using nlohmann::json;

/// Fixed section order of a full run.
const std::vector<std::string> &report_section_names();

struct Alert {
  std::string section;
  std::string subject;
  Verdict severity = Verdict::warn;
  std::string message;
};

/// Fields every judged node carries: verdict, subject, message.
json verdict_fields(Verdict verdict, const std::string &subject, const std::string &message);
/// Adds the verdict fields to `node` in place.
void attach_verdict(json &node, Verdict verdict, const std::string &subject, const std::string &message);

/// Walks a section tree and returns one alert per warn/fail verdict node.
std::vector<Alert> collect_alerts(const std::string &section, const json &node);
json alert_to_json(const Alert &alert);

/// Placeholder for a section that was skipped.
json skipped_section(const std::string &status, const std::string &reason);

/// Thin wrapper over the report document.
struct MonitoringReport {
  json document = json::object();

  std::vector<Alert> alerts() const;
  Verdict status() const;
  bool complete() const;
};

/// Assembles alerts and overall status from the sections already present.
void finalize_report(MonitoringReport &report);

/// 0 all pass, 3 warnings only, 4 any fail, 1 incomplete run.
int exit_code(const MonitoringReport &report);

enum class ReportFormat { json, text };
ReportFormat parse_report_format(std::string_view text);

std::string render_report(const MonitoringReport &report, ReportFormat format);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t state = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

/// Row count plus a 64-bit hash per column.
json fingerprint(const FeatureFrame &frame);
json fingerprint(const ScoredDataset &ds);

/// ISO-8601 UTC, second resolution.
std::string iso8601_utc(std::int64_t seconds_since_epoch);

/// JSON number, or null for non-finite values.
json number_or_null(double value);
json optional_number(const std::optional<double> &value);

}  // namespace valmon
