#include <gtest/gtest.h>

#include <chrono>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "valmon/config.hpp"
#include "valmon/external_model.hpp"
#include "valmon/monitor.hpp"
#include "valmon/report.hpp"

using namespace valmon;
using nlohmann::json;

namespace {

std::string fixture(const std::string &args) { return std::string(VALMON_FIXTURE_MODEL) + " " + args; }

json minimal_config() {
  return json::parse(R"({
    "schema": {"columns": [
      {"name": "x", "kind": "numeric"},
      {"name": "y", "kind": "numeric", "role": "target"},
      {"name": "p", "kind": "numeric", "role": "prediction"}]},
    "data": {"reference": "ref.csv", "current": "cur.csv"}
  })");
}

}  // namespace

TEST(Config, DefaultsAndPaths) {
  const auto cfg = parse_config(minimal_config(), "/base");
  EXPECT_EQ(cfg.resolve(cfg.data.reference), std::filesystem::path("/base/ref.csv"));
  EXPECT_EQ(cfg.drift.bins, 10u);
  EXPECT_TRUE(cfg.drift.thresholds.count("psi"));
  EXPECT_EQ(cfg.schema.features().size(), 1u);
}

TEST(Config, UnknownKeyReportsPointer) {
  auto doc = minimal_config();
  doc["drift"] = {{"binz", 4}};
  try {
    parse_config(doc, "/base");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError &e) {
    EXPECT_EQ(e.pointer(), "/drift/binz");
  }
}

TEST(Config, ThresholdOrderChecked) {
  auto doc = minimal_config();
  doc["drift"] = {{"thresholds", {{"psi", {{"warn", 0.5}, {"fail", 0.1}}}}}};
  EXPECT_THROW(parse_config(doc, "/base"), ConfigError);
  doc["drift"] = {{"thresholds", {{"ks", nullptr}}}};
  EXPECT_FALSE(parse_config(doc, "/base").drift.thresholds.count("ks"));
}

TEST(Report, AlertsFollowVerdicts) {
  MonitoringReport r;
  r.document["complete"] = true;
  r.document["sections"] = json::object();
  json drift = {{"features", json::array()}};
  json a = {{"statistic", 0.3}};
  attach_verdict(a, Verdict::fail, "x:psi", "psi 0.3 above 0.25");
  json b = {{"statistic", 0.12}};
  attach_verdict(b, Verdict::warn, "z:psi", "psi 0.12 above 0.1");
  json c = {{"statistic", 0.01}};
  attach_verdict(c, Verdict::pass, "w:psi", "ok");
  drift["features"] = {a, b, c};
  r.document["sections"]["drift"] = drift;
  finalize_report(r);
  ASSERT_EQ(r.alerts().size(), 2u);
  EXPECT_EQ(r.status(), Verdict::fail);
  EXPECT_EQ(exit_code(r), 4);
  const auto text = render_report(r, ReportFormat::text);
  EXPECT_EQ(text.rfind("ALERTS: 2\n  [FAIL] drift / x:psi", 0), 0u);
  r.document["complete"] = false;
  EXPECT_EQ(exit_code(r), 1);
}

TEST(Report, Iso8601) {
  EXPECT_EQ(iso8601_utc(0), "1970-01-01T00:00:00Z");
  EXPECT_EQ(iso8601_utc(951782400), "2000-02-29T00:00:00Z");
}

TEST(ExternalModel, IdentityRoundTrip) {
  const auto f = test::frame_of({{"a", {1.5, -2, 3.25}}, {"b", {0, 0, 0}}});
  const auto out = score_external({fixture("identity a"), 10}, f);
  EXPECT_EQ(out, (std::vector<double>{1.5, -2, 3.25}));
}

TEST(ExternalModel, StructuredErrors) {
  const auto f = test::frame_of({{"a", {1, 2, 3}}});
  auto kind_of = [&](const std::string &args, double timeout) {
    try {
      score_external({fixture(args), timeout}, f);
    } catch (const ModelProtocolError &e) {
      return std::string(to_string(e.kind()));
    }
    return std::string("none");
  };
  EXPECT_EQ(kind_of("malformed", 10), "parse");
  EXPECT_EQ(kind_of("short a", 10), "count");
  EXPECT_EQ(kind_of("exit 3", 10), "exit_code");
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(kind_of("sleep 30", 0.5), "timeout");
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
}

TEST(Monitor, RobustnessThroughExternalModel) {
  auto doc = json::parse(std::string(R"({
    "schema": {"columns": [
      {"name": "x1"}, {"name": "x2"},
      {"name": "segment", "kind": "categorical"},
      {"name": "y", "role": "target"}, {"name": "pred", "role": "prediction"}]},
    "data": {"reference": "ref.csv", "current": "cur_clean.csv"},
    "run": {"seed": 1, "timestamp": "2024-01-01T00:00:00Z"},
    "robustness": {"n_repeats": 2, "timeout_seconds": 20}
  })"));
  doc["robustness"]["model_command"] = fixture("identity x1");
  doc["robustness"]["irrelevant_features"] = {"x2"};
  auto report = run_monitor(parse_config(doc, VALMON_E2E_FIXTURES), {{"robustness"}, std::nullopt});
  const auto &section = report.document["sections"]["robustness"];
  ASSERT_TRUE(report.complete()) << report.document["error"].dump();
  ASSERT_EQ(section["sensitivity"]["features"].size(), 2u);
  EXPECT_EQ(section["sensitivity"]["features"][1]["mean_abs_prediction_delta"], 0.0);
  EXPECT_EQ(report.status(), Verdict::pass);

  doc["robustness"]["irrelevant_features"] = {"x1"};
  report = run_monitor(parse_config(doc, VALMON_E2E_FIXTURES), {{"robustness"}, std::nullopt});
  EXPECT_EQ(report.status(), Verdict::fail);
  EXPECT_EQ(exit_code(report), 4);
}
