#include <string>

#include <gtest/gtest.h>

#include "polebridge/config.hpp"
#include "polebridge/experiment.hpp"
#include "polebridge/report_io.hpp"

using namespace polebridge;

namespace {

std::vector<std::string> config_errors(const std::string& text, const std::string& check = "") {
  try {
    parse_config(text, check);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Config, MinimalIbpFillsDefaults) {
  const auto cfg = parse_config(R"j({"geometry": {"kind": "euclidean", "dim": 2}, "experiment": {"check": "ibp"}})j");
  EXPECT_EQ(cfg.geometry.dim, 2);
  EXPECT_EQ(cfg.simulation.steps, 2000u);
  EXPECT_DOUBLE_EQ(cfg.simulation.eps_end, 1e-4);
  EXPECT_EQ(cfg.simulation.refinement, "geometric");
  EXPECT_EQ(cfg.simulation.seed, 1u);
  ASSERT_EQ(cfg.experiment.cases.size(), 1u);
  EXPECT_EQ(cfg.experiment.cases[0].h, "sine(1,1)");
  EXPECT_DOUBLE_EQ(cfg.experiment.z_threshold, 3.0);
}

TEST(Config, DimensionZeroMessage) {
  const auto errs = config_errors(R"j({"geometry": {"dim": 0}})j", "ibp");
  EXPECT_TRUE(any_contains(errs, "dimension must be ≥ 1"));
}

TEST(Config, UnknownFunctionalListsRegistry) {
  const auto errs = config_errors(R"j({"experiment": {"check": "ibp", "F": "wobble(1)"}})j");
  ASSERT_TRUE(any_contains(errs, "wobble"));
  for (const auto& key : functional_registry_keys()) EXPECT_TRUE(any_contains(errs, key)) << key;
}

TEST(Config, CollectsAllErrors) {
  const auto errs = config_errors(
      R"j({"geometry": {"dim": 0, "colour": 1}, "simulation": {"steps": 1, "eps_end": 2}, "extra": {}})j", "radial");
  EXPECT_GE(errs.size(), 5u);
  EXPECT_TRUE(any_contains(errs, "colour"));
  EXPECT_TRUE(any_contains(errs, "'.extra'"));
  EXPECT_TRUE(any_contains(errs, "steps"));
  EXPECT_TRUE(any_contains(errs, "eps_end"));
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_TRUE(any_contains(config_errors(R"j({"simulation": {"paths": "many"}})j", "ibp"), "simulation.paths"));
  EXPECT_TRUE(any_contains(config_errors(R"j({"geometry": {"kind": "torus"}})j", "ibp"), "geometry.kind"));
  EXPECT_TRUE(any_contains(config_errors(R"j({"geometry": {"kind": "warped", "profile": "x"}})j", "ibp"), "profile"));
  EXPECT_TRUE(any_contains(config_errors(R"j({"experiment": {"h": "ramp(1)"}})j", "equiv"), "not pinned"));
  EXPECT_TRUE(any_contains(config_errors(R"j({"experiment": {"ts": [0.9, 0.5]}})j", "decay"), "increasing"));
  EXPECT_TRUE(any_contains(config_errors(R"j({"experiment": {"check": "ibp"}})j", "radial"), "command is 'radial'"));
  EXPECT_TRUE(any_contains(config_errors("{}"), "check is missing"));
  EXPECT_TRUE(any_contains(config_errors("[1,"), "malformed JSON"));
  EXPECT_TRUE(any_contains(config_errors(R"j({"experiment": {"check": "bake"}})j"), "unknown check"));
  EXPECT_TRUE(any_contains(config_errors(R"j({"experiment": {"t": 0.5, "functionals": ["dist2(0.75)"]}})j", "girsanov"),
                           "after experiment.t"));
}

TEST(ReportIo, SeventeenDigitNumbers) {
  EXPECT_EQ(format_g17(0.1), "0.10000000000000001");
  EXPECT_EQ(to_json_text(Json{{"x", 0.1}, {"n", 3}}, 0), R"j({"x":0.10000000000000001,"n":3})j");
  EXPECT_EQ(to_json_text(Json{{"inf", std::numeric_limits<double>::infinity()}}, 0), R"j({"inf":null})j");
  const Json parsed = Json::parse(to_json_text(Json{{"v", 1.0 / 3.0}}));
  EXPECT_EQ(parsed["v"].get<double>(), 1.0 / 3.0);
}

TEST(ReportIo, McReportSingleObject) {
  McReport r;
  r.label = "ibp[x]";
  r.estimate_lhs = 0.5;
  r.extras["t_node"] = 0.25;
  const Json j = Json::parse(to_json_text(to_json(r)));
  ASSERT_TRUE(j.is_object());
  for (const char* key :
       {"label", "lhs", "rhs", "se_lhs", "se_rhs", "z", "n_paths", "steps", "eps_end", "seed", "wall_time"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["extras"]["t_node"].get<double>(), 0.25);
}

TEST(ReportIo, CsvHeadersAndRows) {
  EXPECT_EQ(reports_csv({}), "label,lhs,rhs,se_lhs,se_rhs,se_diff,z,n_paths,n_failed,steps,eps_end,seed\n");
  EXPECT_EQ(decay_csv({}), "label,t,t_node,m,se\n");
  EXPECT_EQ(identity_csv({}), "check,tau,r,value,reference,rel_err,tolerance,pass\n");
  DecayTable t;
  t.label = "d";
  t.rows.push_back({0.9, 0.9, 0.5, 0.25});
  EXPECT_EQ(decay_csv({t}), "label,t,t_node,m,se\nd,0.90000000000000002,0.90000000000000002,0.5,0.25\n");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(path_dump_header(2, true), "path,t,x_1,x_2,r,u_1_1,u_1_2,u_2_1,u_2_2\n");
}

TEST(Experiment, IdentitiesPassOnHyperbolic) {
  const auto cfg = parse_config(R"j({"geometry": {"kind": "hyperbolic", "dim": 3}, "experiment": {"points": 5}})j",
                                "identities");
  const auto res = run_experiment(cfg);
  EXPECT_TRUE(res.passed);
  EXPECT_EQ(res.exit_code, exit_pass);
  EXPECT_EQ(res.document["identities"]["failures"].get<std::size_t>(), 0u);
  EXPECT_EQ(res.csv.substr(0, 6), "check,");
}

TEST(Experiment, OutputIndependentOfJobs) {
  const auto cfg = parse_config(
      R"j({"geometry": {"kind": "hyperbolic", "dim": 2},
          "simulation": {"steps": 60, "eps_end": 1e-3, "paths": 150, "seed": 5},
          "experiment": {"cases": [{"F": "dist2(0.5)", "G": "one", "h": "sine(1,1)"}]}})j",
      "ibp");
  const auto ref = to_json_text(without_wall_time(run_experiment(cfg, 1).document));
  EXPECT_EQ(ref.find("wall_time"), std::string::npos);
  for (int jobs : {4, 8}) EXPECT_EQ(to_json_text(without_wall_time(run_experiment(cfg, jobs).document)), ref);
}

TEST(Experiment, StatisticalFailureGivesExitOne) {
  // a threshold below any attainable |z| must fail the gate
  const auto cfg = parse_config(
      R"j({"simulation": {"steps": 40, "eps_end": 1e-3, "paths": 50},
          "experiment": {"z_threshold": 1e-12, "cases": [{"F": "dist2(0.5)", "G": "one", "h": "sine(1,1)"}]}})j",
      "ibp");
  const auto res = run_experiment(cfg);
  EXPECT_FALSE(res.passed);
  EXPECT_EQ(res.exit_code, exit_statistical);
  EXPECT_FALSE(res.document["failures"].empty());
}

TEST(Experiment, SimulateDumpsEveryNode) {
  const auto cfg = parse_config(R"j({"simulation": {"steps": 10, "eps_end": 0.01, "paths": 3}})j", "simulate");
  const auto res = run_experiment(cfg);
  std::size_t lines = 0;
  for (char c : res.path_dump) lines += c == '\n';
  EXPECT_EQ(lines, 1u + 3u * 11u);
  EXPECT_EQ(res.document["summary"]["n_paths"].get<std::size_t>(), 3u);
}
