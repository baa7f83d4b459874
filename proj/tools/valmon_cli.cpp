// valmon command line: one subcommand per report section plus the full
// `monitor` pipeline and `report` rendering.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "CLI11.hpp"
#include "valmon/csv.hpp"
#include "valmon/monitor.hpp"

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> timestamp;
  std::string out;
  std::string format = "json";
};

void add_common(CLI::App *cmd, Common &c) {
  cmd->add_option("--config", c.config, "Path to the run configuration (JSON)")->required();
  cmd->add_option("--seed", c.seed, "Override the configured seed");
  cmd->add_option("--timestamp", c.timestamp, "Report created_at value (ISO-8601)");
  cmd->add_option("--out", c.out, "Write the report here instead of stdout");
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "text"}));
}

void emit(const std::string &text, const std::string &out) {
  if (out.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    valmon::csv::write_file(out, text);
  }
}

int run_sections(const Common &c, const std::vector<std::string> &sections) {
  auto config = valmon::parse_config(c.config);
  if (c.seed) config.set_seed(*c.seed);
  valmon::RunOptions options;
  options.sections = sections;
  options.timestamp = c.timestamp;
  const auto report = valmon::run_monitor(config, options);
  emit(valmon::render_report(report, valmon::parse_report_format(c.format)), c.out);
  if (const auto &err = report.document["error"]; !err.is_null())
    std::cerr << "valmon: section " << err["section"].get<std::string>() << " failed: "
              << err["code"].get<std::string>() << ": " << err["message"].get<std::string>() << "\n";
  return valmon::exit_code(report);
}

int render_saved(const std::string &input, const std::string &format, const std::string &out) {
  valmon::MonitoringReport report;
  try {
    report.document = nlohmann::json::parse(valmon::csv::read_file(input));
  } catch (const nlohmann::json::parse_error &e) {
    throw valmon::ConfigError("/", std::string("report is not valid JSON: ") + e.what());
  }
  emit(valmon::render_report(report, valmon::parse_report_format(format)), out);
  return valmon::exit_code(report);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Validation and monitoring for tabular predictive models"};
  app.require_subcommand(1);

  const std::map<std::string, std::pair<std::string, std::vector<std::string>>> commands{
      {"quality", {"Missingness, rule checks and outliers on the current dataset", {"data_quality"}}},
      {"drift", {"Per-feature and multivariate distribution shift", {"drift"}}},
      {"concept-drift", {"Residual-based concept drift diagnosis", {"concept_drift"}}},
      {"conformal", {"Conformal intervals, coverage and probability calibration", {"uncertainty"}}},
      {"weakness", {"Segment lift scan, clustering and fit gaps", {"weakness"}}},
      {"robustness", {"Noise sensitivity and invariance via the model command", {"robustness"}}},
      {"monitor", {"Full monitoring pipeline", {}}},
  };
  std::map<std::string, Common> options;
  std::map<std::string, CLI::App *> subs;
  for (const auto &[name, info] : commands) {
    subs[name] = app.add_subcommand(name, info.first);
    add_common(subs[name], options[name]);
  }

  auto *report_cmd = app.add_subcommand("report", "Render a saved report, or run the pipeline and render it");
  std::string report_input;
  Common report_opts;
  auto *input_opt = report_cmd->add_option("--input", report_input, "Saved report JSON");
  auto *config_opt = report_cmd->add_option("--config", report_opts.config, "Run configuration (JSON)");
  input_opt->excludes(config_opt);
  report_cmd->add_option("--seed", report_opts.seed, "Override the configured seed");
  report_cmd->add_option("--timestamp", report_opts.timestamp, "Report created_at value (ISO-8601)");
  report_cmd->add_option("--out", report_opts.out, "Write here instead of stdout");
  report_cmd->add_option("--format", report_opts.format, "Output format")
      ->check(CLI::IsMember({"json", "text"}))
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (report_cmd->parsed()) {
      if (!report_input.empty()) return render_saved(report_input, report_opts.format, report_opts.out);
      if (report_opts.config.empty()) {
        std::cerr << "valmon report: one of --input or --config is required\n";
        return kExitUsage;
      }
      return run_sections(report_opts, {});
    }
    for (const auto &[name, info] : commands)
      if (subs[name]->parsed()) return run_sections(options[name], info.second);
  } catch (const valmon::ConfigError &e) {
    if (e.pointer().empty())
      std::cerr << "valmon: config error: " << std::string_view(e.what()).substr(2) << "\n";
    else
      std::cerr << "valmon: config error at " << e.what() << "\n";
    return kExitUsage;
  } catch (const valmon::Error &e) {
    // Raised before any section ran: unreadable or malformed input data.
    std::cerr << "valmon: " << e.code() << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "valmon: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
