#pragma once

// One monitoring run: load datasets, build the requested report sections in
// a fixed order and derive alerts.

#include <optional>
#include <string>
#include <vector>

#include "valmon/config.hpp"
#include "valmon/report.hpp"

namespace valmon {

struct RunOptions {
  /// Sections to build, by report name; empty means all of them.
  std::vector<std::string> sections;
  /// Overrides the config's run timestamp.
  std::optional<std::string> timestamp;
};

/// Never throws for module errors: the failing section is recorded and the
/// report is marked incomplete. Dataset load errors propagate.
MonitoringReport run_monitor(const MonitorConfig &config, const RunOptions &options = {});

json drift_result_to_json(const DriftResult &result);
std::string drift_subject(const DriftResult &result);

}  // namespace valmon
