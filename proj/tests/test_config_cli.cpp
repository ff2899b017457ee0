#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bfm/experiment.hpp"

namespace bfm {
namespace {

namespace fs = std::filesystem;

const std::string kCli = BFM_CLI_PATH;
const std::string kConfigs = BFM_CONFIG_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bfm_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct CliRun {
  int code = -1;
  std::string output;  // stdout and stderr together
};

CliRun cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "console.txt";
  const std::string cmd = "'" + kCli + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::string config(const std::string& name) { return "'" + kConfigs + "/" + name + "'"; }

ConfigError parse_error(const std::string& text) {
  try {
    parse_config(json::parse(text));
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "no ConfigError for " << text;
  return ConfigError("?", "?");
}

const char* kSpaces = R"("spaces": {"F": {"alphas": {"rule": "geometric", "c": 1, "q": 0.5}}})";

std::string doc(const std::string& body) {
  return std::string("{\"schema_version\": 1, ") + kSpaces + (body.empty() ? "" : ", " + body) + "}";
}

// ---------------------------------------------------------------------------
// schema

TEST(ConfigSchema, MissingAlphasPointsAtTheField) {
  const auto e = parse_error(R"({"schema_version": 1, "spaces": {"F": {"seminorms": {"family": "prefix_sup"}}}})");
  EXPECT_EQ(e.pointer(), "/spaces/F/alphas");
}

TEST(ConfigSchema, PointersForCommonMistakes) {
  EXPECT_EQ(parse_error(R"({"spaces": {}})").pointer(), "/schema_version");
  EXPECT_EQ(parse_error(R"({"schema_version": 2, "spaces": {}})").pointer(), "/schema_version");
  EXPECT_EQ(parse_error(doc(R"("bogus": 1)")).pointer(), "/bogus");
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "spaces": {"F": {"alphas": {"rule": "cubic"}}}})").pointer(),
            "/spaces/F/alphas/rule");
  EXPECT_EQ(parse_error(R"({"schema_version": 1, "spaces": {"F": {"alphas": {"rule": "geometric", "q": 2}}}})")
                .pointer(),
            "/spaces/F/alphas");
  EXPECT_EQ(parse_error(doc(R"("metric": {"space": "G"})")).pointer(), "/metric/space");
  EXPECT_EQ(parse_error(doc(R"("metric": {"triples": -3})")).pointer(), "/metric/triples");
  EXPECT_EQ(parse_error(doc(R"("operators": {"items": [{"name": "a", "kind": "warp"}]})")).pointer(),
            "/operators/items/0/kind");
  EXPECT_EQ(parse_error(doc(R"("fields": {"f": {"components": ["x1 +"]}})")).pointer(), "/fields/f/components/0");
  EXPECT_EQ(parse_error(doc(R"("integrate": [{"name": "a", "field": "nope", "p0": [1], "r": 1}])")).pointer(),
            "/integrate/0/field");
  EXPECT_EQ(parse_error(doc(R"("split": {"connection": "nope"})")).pointer(), "/split/connection");
  EXPECT_EQ(parse_error(doc(R"("compat": {"pairs": []})")).pointer(), "/atlas");
  EXPECT_EQ(parse_error(doc(R"("atlas": {"preset": "three_chart"}, "connections": {"g": {"chart": "nowhere",
            "degree": 1, "coefficients": []}})"))
                .pointer(),
            "/connections/g/chart");
  EXPECT_EQ(parse_error(doc(R"("odes": {"systems": [{"name": "a", "matrix": [["1", "t"]], "t_range": [0, 1]}]})"))
                .pointer(),
            "/odes/systems/0/matrix");
}

TEST(ConfigSchema, DefaultConfigConfiguresEverySuite) {
  const ExperimentConfig c = load_config(kConfigs + "/default.json");
  for (const auto& s : suite_names()) EXPECT_EQ(missing_section(c, s), "") << s;
  ASSERT_TRUE(c.seed.has_value());
  EXPECT_EQ(c.spaces.count("F"), 1u);
}

TEST(ConfigSchema, UnreadableOrInvalidFiles) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
  const fs::path dir = scratch("invalid");
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
}

// ---------------------------------------------------------------------------
// experiment runs in-process

TEST(Experiment, SeedIsMandatoryForRandomizedSuites) {
  const ExperimentConfig c = parse_config(json::parse(doc(R"("metric": {"triples": 10, "convexity_samples": 10,
      "oracle_samples": 10})")));
  RunOptions opt;
  opt.write_files = false;
  try {
    run_experiment(c, "verify-metric", {}, opt);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.pointer(), "/seed");
  }
  opt.seed = 5;
  EXPECT_TRUE(run_experiment(c, "verify-metric", {}, opt).pass());
}

TEST(Experiment, SkipsAreReportedExplicitly) {
  const ExperimentConfig c = parse_config(json::parse(doc(R"("seed": 3, "metric": {"triples": 10,
      "convexity_samples": 10, "oracle_samples": 10})")));
  RunOptions opt;
  opt.write_files = false;
  const Report rep = run_experiment(c, "all", {}, opt);
  ASSERT_EQ(rep.suites.size(), 1u);
  EXPECT_EQ(rep.skipped.size(), suite_names().size() - 1);
  const json j = rep.to_json();
  EXPECT_EQ(j["skipped"].size(), suite_names().size() - 1);
  EXPECT_EQ(j["summary"]["skipped"], suite_names().size() - 1);
  // selecting an unconfigured suite is a config problem, not a silent skip
  EXPECT_THROW(run_experiment(c, "all", {"flow"}, opt), ConfigError);
  EXPECT_THROW(run_experiment(c, "all", {"no-such-suite"}, opt), ConfigError);
  EXPECT_THROW(run_experiment(c, "flow", {}, opt), ConfigError);
  const Report only = run_experiment(c, "all", {"verify-metric"}, opt);
  EXPECT_EQ(only.suites.size(), 1u);
}

TEST(Experiment, ReportsAreSortedAndDeterministic) {
  const ExperimentConfig c = load_config(kConfigs + "/default.json");
  RunOptions opt;
  opt.write_files = false;
  const std::string a = run_experiment(c, "all", {"verify-atlas", "ode-roundtrip"}, opt).to_json().dump(2);
  const std::string b = run_experiment(c, "all", {"ode-roundtrip", "verify-atlas"}, opt).to_json().dump(2);
  EXPECT_EQ(a, b);
  const json j = json::parse(a);
  ASSERT_EQ(j["suites"].size(), 2u);
  EXPECT_EQ(j["suites"][0]["name"], "ode-roundtrip");
  for (const auto& s : j["suites"]) {
    std::string prev;
    for (const auto& ch : s["checks"]) {
      EXPECT_LE(prev, ch["name"].get<std::string>());
      prev = ch["name"];
    }
  }
  opt.seed = 99;
  const std::string other = run_experiment(c, "all", {"verify-atlas", "ode-roundtrip"}, opt).to_json().dump(2);
  EXPECT_NE(a, other);
}

TEST(Experiment, FailuresCarryWitnesses) {
  const ExperimentConfig c = load_config(kConfigs + "/inconsistent_bounds.json");
  RunOptions opt;
  opt.write_files = false;
  const Report rep = run_experiment(c, "integrate", {}, opt);
  EXPECT_FALSE(rep.pass());
  const json j = rep.to_json();
  const auto& check = j["suites"][0]["checks"][0];
  EXPECT_FALSE(check["pass"].get<bool>());
  EXPECT_NE(check["witness"].get<std::string>().find("L_sup"), std::string::npos) << check.dump();
}

// ---------------------------------------------------------------------------
// the executable

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit");
  const std::string out = " --out '" + (dir / "out").string() + "'";
  EXPECT_EQ(cli("integrate --config " + config("default.json") + out, dir).code, 0);
  const CliRun bad = cli("integrate --config " + config("inconsistent_bounds.json") + out, dir);
  EXPECT_EQ(bad.code, 1) << bad.output;
  EXPECT_TRUE(fs::exists(dir / "out" / "integrate.json"));
  EXPECT_EQ(cli("verify-metric --config " + config("malformed_missing_alphas.json") + out, dir).code, 2);
  EXPECT_EQ(cli("verify-metric" + out, dir).code, 2);
  EXPECT_EQ(cli("--config " + config("default.json") + out, dir).code, 2);
  EXPECT_EQ(cli("frobnicate --config " + config("default.json") + out, dir).code, 2);
  EXPECT_EQ(cli("integrate --grid-step -1 --config " + config("default.json") + out, dir).code, 2);
  EXPECT_EQ(cli("flow --config " + config("inconsistent_bounds.json") + out, dir).code, 2);
  EXPECT_EQ(cli("flow --suite integrate --config " + config("default.json") + out, dir).code, 2);
}

TEST(Cli, MissingAlphasNamesThePointer) {
  const fs::path dir = scratch("alphas");
  const CliRun r = cli("verify-metric --config " + config("malformed_missing_alphas.json") + " --out '" +
                        (dir / "out").string() + "'",
                    dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("/spaces/F/alphas"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(dir / "out" / "verify-metric.json"));
}

TEST(Cli, FixedSeedGivesByteIdenticalReports) {
  const fs::path dir = scratch("determinism");
  for (const char* o : {"a", "b"})
    ASSERT_EQ(cli("all --config " + config("default.json") + " --out '" + (dir / o).string() + "'", dir).code, 0);
  const std::string a = slurp(dir / "a" / "all.json"), b = slurp(dir / "b" / "all.json");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  EXPECT_EQ(slurp(dir / "a" / "exp.csv"), slurp(dir / "b" / "exp.csv"));
  ASSERT_EQ(cli("all --seed 11 --config " + config("default.json") + " --out '" + (dir / "c").string() + "'", dir)
                .code,
            0);
  EXPECT_EQ(json::parse(slurp(dir / "c" / "all.json"))["seed"], 11);
}

// CSV from the exp config against e^t computed here; the error must stay
// inside the certificate written to the report.
TEST(Cli, ExpCurveWithinCertificate) {
  const fs::path dir = scratch("exp");
  ASSERT_EQ(cli("integrate --config " + config("default.json") + " --out '" + (dir / "out").string() + "'", dir).code,
            0);
  const json rep = json::parse(slurp(dir / "out" / "integrate.json"));
  const json& details = rep["suites"][0]["details"]["exp"];
  const double certificate = details["certificate"];
  EXPECT_EQ(details["iterations"], 8);
  EXPECT_DOUBLE_EQ(details["parameters"]["m"].get<double>(), 0.5);

  std::ifstream csv(dir / "out" / "exp.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "t,x1");
  double sup_err = 0.0, t_first = 0.0, t_last = 0.0;
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    const auto comma = line.find(',');
    const double t = std::stod(line.substr(0, comma)), x = std::stod(line.substr(comma + 1));
    if (rows++ == 0) t_first = t;
    t_last = t;
    sup_err = std::max(sup_err, std::abs(x - std::exp(t)));
  }
  EXPECT_EQ(rows, 1001u);
  EXPECT_DOUBLE_EQ(t_first, -0.5);
  EXPECT_DOUBLE_EQ(t_last, 0.5);
  EXPECT_GT(sup_err, 0.0);
  EXPECT_LE(sup_err, certificate);
}

TEST(Cli, OverridesReachTheSolver) {
  const fs::path dir = scratch("overrides");
  ASSERT_EQ(cli("integrate --grid-step 0.002 --tol 1e-9 --config " + config("default.json") + " --out '" +
                    (dir / "out").string() + "'",
                dir)
                .code,
            0);
  const json rep = json::parse(slurp(dir / "out" / "integrate.json"));
  const json& p = rep["suites"][0]["details"]["riccati"]["parameters"];
  EXPECT_DOUBLE_EQ(p["tol"].get<double>(), 1e-9);
  std::ifstream csv(dir / "out" / "exp.csv");
  std::size_t lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  EXPECT_EQ(lines, 502u);  // header + 501 nodes
}

TEST(Cli, SuiteFilterUnderAll) {
  const fs::path dir = scratch("filter");
  const CliRun r = cli("all --suite flow --suite uniqueness --config " + config("default.json") + " --out '" +
                        (dir / "out").string() + "'",
                    dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const json rep = json::parse(slurp(dir / "out" / "all.json"));
  EXPECT_EQ(rep["suites"].size(), 2u);
  EXPECT_EQ(rep["skipped"].size(), suite_names().size() - 2);
  for (const auto& s : rep["skipped"]) EXPECT_EQ(s["reason"], "not selected");
}

}  // namespace
}  // namespace bfm
