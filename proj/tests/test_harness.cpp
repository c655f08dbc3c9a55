#include "curvflow/harness/config.hpp"
#include "curvflow/harness/output.hpp"
#include "curvflow/harness/scenarios.hpp"
#include "curvflow/harness/selftest.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace curvflow;
using namespace curvflow::harness;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({"surface": {"type": "grid", "n": 6}, "f": {"type": "constant", "value": -1}})";

ConfigError config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a ConfigError for: " << text);
  return ConfigError("unreachable");
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("curvflow_test_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

} // namespace

TEST_CASE("minimal config takes the documented defaults") {
  ExperimentConfig c = parse_config(kMinimal);
  CHECK(c.scenario == "generic");
  CHECK(c.surface.type == SurfaceType::Grid);
  CHECK(c.surface.n == 6);
  CHECK(c.surface.kbar == -1.0);
  CHECK(c.A == 1.0);
  CHECK(c.u0.kind == U0Spec::Kind::Constant);
  CHECK(c.seed == 0);
  CHECK(std::get<ConstantField>(c.f).value == -1.0);
  CHECK(c.assertions.converged);
  CHECK_FALSE(c.assertions.lambda_positive);
  CHECK_FALSE(c.assertions.lambda_expected);
}

TEST_CASE("scenario defaults") {
  ExperimentConfig c = parse_config(
      R"({"scenario": "constant-f", "surface": {"type": "grid", "n": 4, "kbar": -2}, "f": {"type": "constant", "value": 0.5}, "A": 4})");
  REQUIRE(c.assertions.lambda_expected);
  CHECK(*c.assertions.lambda_expected == doctest::Approx(-2.0 / 4.0 - 0.5));
  CHECK(c.assertions.u_constant_tol);

  c = parse_config(
      R"({"scenario": "low-energy-bump", "surface": {"type": "grid", "n": 4}, "f": {"type": "constant", "value": -1}, "A": 5})");
  CHECK(c.u0.kind == U0Spec::Kind::Bump);
  CHECK(c.assertions.lambda_positive);
  CHECK(c.assertions.stab_eig_negative);

  c = parse_config(
      R"({"scenario": "sign-changing", "surface": {"type": "grid", "n": 4}, "f": {"type": "constant", "value": -1}, "assertions": {"lambda_positive": false}})");
  CHECK_FALSE(c.assertions.lambda_positive);
}

TEST_CASE("syntax errors carry line and column") {
  ConfigError e = config_error("{\n  \"surface\": {\"type\": \"grid\",\n  \"n\": 8 }\n  \"f\": 1\n}\n");
  CHECK(e.line == 4);
  CHECK(e.column == 5);
  CHECK(std::string(e.what()).rfind("line 4, column 5: ", 0) == 0);
  CHECK(std::string(e.what()).find("parse error at") == std::string::npos);

  e = config_error("{\"a\": tru}");
  CHECK(e.line == 1);
  CHECK(e.column > 1);
}

TEST_CASE("semantic errors name the JSON path") {
  ConfigError e = config_error(
      R"({"surface": {"type": "grid", "n": 8}, "f": {"type": "constant", "value": -1, "vale": 2}})");
  CHECK(e.path == "/f/vale");
  CHECK(std::string(e.what()).find("/f/vale") != std::string::npos);
  CHECK(e.line == 0);

  CHECK(config_error(R"({"surface": {"type": "grid", "n": 1}, "f": {"type": "constant", "value": -1}})").path ==
        "/surface/n");
  CHECK(config_error(R"({"surface": {"type": "grid", "kbar": 0}, "f": {"type": "constant", "value": -1}})").path ==
        "/surface/kbar");
  CHECK(config_error(R"({"surface": {"type": "torus"}, "f": {"type": "constant", "value": -1}})").path ==
        "/surface/type");
  CHECK(config_error(R"({"surface": {"type": "grid"}, "f": {"type": "constant", "value": "x"}})").path ==
        "/f/value");
  CHECK(config_error(R"({"surface": {"type": "grid"}, "f": {"type": "constant", "value": -1}, "A": -1})").path ==
        "/A");
  CHECK(config_error(R"({"surface": {"type": "grid"}, "f": {"type": "constant", "value": -1}, "seed": -3})").path ==
        "/seed");
  CHECK(config_error(R"({"surface": {"type": "grid"}, "f": {"type": "constant", "value": -1}, "scenario": "x"})")
            .path == "/scenario");
  CHECK(config_error(R"({"f": {"type": "constant", "value": -1}})").path.empty());
  CHECK(config_error(
            R"({"surface": {"type": "grid"}, "f": {"type": "constant", "value": -1}, "flow": {"dt_min": -1}})")
            .path == "/flow");
}

TEST_CASE("constant-f scenario rejects a nonconstant f") {
  ConfigError e = config_error(
      R"({"scenario": "constant-f", "surface": {"type": "grid"}, "f": {"type": "cos-bump"}})");
  CHECK(e.path == "/f");
}

TEST_CASE("bump datum needs A >= 1") {
  ConfigError e = config_error(
      R"({"surface": {"type": "grid"}, "f": {"type": "constant", "value": -1}, "A": 0.5, "u0": {"type": "bump"}})");
  CHECK(e.path == "/A");
}

TEST_CASE("lambda grid as a list or a range") {
  auto grid = [](const std::string& g) {
    return parse_config(R"({"surface": {"type": "grid"}, "f": {"type": "constant", "value": -1}, "lambda_grid": )" +
                        g + "}")
        .lambda_grid;
  };
  CHECK(grid("[-1, 0, 0.5]") == std::vector<double>{-1.0, 0.0, 0.5});
  std::vector<double> r = grid(R"({"start": -1, "stop": 1, "step": 0.25})");
  REQUIRE(r.size() == 9);
  CHECK(r.front() == -1.0);
  CHECK(r.back() == doctest::Approx(1.0));
  CHECK_THROWS_AS(grid("[0, 0]"), ConfigError);
  CHECK_THROWS_AS(grid("[]"), ConfigError);
  CHECK_THROWS_AS(grid(R"({"start": 1, "stop": 0, "step": 0.1})"), ConfigError);
  CHECK_THROWS_AS(grid(R"({"start": 0, "stop": 1, "step": 0})"), ConfigError);
}

TEST_CASE("builders follow the config") {
  ExperimentConfig c = parse_config(
      R"({"surface": {"type": "two-vertex", "weight": 2.5, "kbar": -3}, "f": {"type": "constant", "value": -1}, "A": 2, "u0": {"type": "random", "amplitude": 0.5}, "seed": 5})");
  DiscreteSurface s = build_surface(c);
  CHECK(s.n() == 2);
  CHECK(s.kbar == -3.0);
  CHECK(s.stiffness.coeff(0, 1) == -2.5);
  ScalarField u = build_u0(c, s);
  CHECK(conformal_volume(s, u) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(build_u0(c, s) == u);
  c.seed = 6;
  CHECK(build_u0(c, s) != u);
  CHECK(build_f(c, s) == ScalarField::Constant(2, -1.0));
}

TEST_CASE("field files") {
  fs::path dir = scratch("fields");
  {
    std::ofstream(dir / "f.txt") << "-1 -2\n";
    std::ofstream(dir / "bad.txt") << "-1 x\n";
  }
  ExperimentConfig c = parse_config(
      R"({"surface": {"type": "two-vertex"}, "f": {"type": "file", "path": "f.txt"}, "u0": {"type": "file", "path": "f.txt"}})",
      dir);
  DiscreteSurface s = build_surface(c);
  CHECK(build_f(c, s) == Eigen::Vector2d(-1.0, -2.0));
  ScalarField u0 = build_u0(c, s);
  CHECK(conformal_volume(s, u0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(u0[0] - u0[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(read_field_file(dir / "bad.txt"), ConfigError);
  CHECK_THROWS_AS(read_field_file(dir / "missing.txt"), ConfigError);

  c = parse_config(R"({"surface": {"type": "grid", "n": 3}, "f": {"type": "file", "path": "f.txt"}})", dir);
  CHECK_THROWS_AS(build_f(c, build_surface(c)), ConfigError);
}

TEST_CASE("FNV-1a reference vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(NAN) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("CSV layouts") {
  std::vector<TraceRow> trace{{0.0, 0.1, 1.5, 2.0, -0.25, 1.0, -0.5, 0.5, 1e-17, 0.0}};
  CHECK(trace_csv(trace) == std::string(kTraceHeader) + "\n0,0.10000000000000001,1.5,2,-0.25,1,-0.5,0.5,1.0000000000000001e-17\n");
  CHECK(trace_csv({}) == std::string(kTraceHeader) + "\n");

  BranchResult b;
  b.points.push_back({-1.0, ScalarField::Zero(1), 0.75, 2.0, 3, 1e-12});
  CHECK(branch_csv(b) == std::string(kBranchHeader) + "\n-1,0.75,2,3,9.9999999999999998e-13\n");
}

TEST_CASE("surface JSON lists areas and stiffness triplets") {
  auto j = nlohmann::json::parse(surface_json(build_two_vertex(1.5, -1.0)));
  CHECK(j["n"] == 2);
  CHECK(j["kbar"] == -1.0);
  CHECK(j["areas"] == nlohmann::json::array({0.5, 0.5}));
  CHECK(j["stiffness"].size() == 4);
  double sum = 0.0;
  for (const auto& t : j["stiffness"]) sum += t[2].get<double>();
  CHECK(sum == 0.0);
}

TEST_CASE("run scenario: constant f reaches the constant solution") {
  ExperimentConfig c = parse_config(
      R"({"scenario": "constant-f", "surface": {"type": "grid", "n": 6}, "f": {"type": "constant", "value": -0.4}, "A": 4, "u0": {"type": "random", "amplitude": 0.2}, "seed": 3})");
  RunReport r = run_scenario(c);
  CHECK(r.passed);
  CHECK(r.flow.converged);
  CHECK(r.volume == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(r.flow.lambda == doctest::Approx(-0.25 + 0.4).epsilon(1e-9));
  for (const auto& a : r.assertions) CHECK_MESSAGE(a.passed, a.name << ": " << a.detail);

  std::string json = result_json(c, r);
  CHECK(json == result_json(c, run_scenario(c)));
  auto j = nlohmann::json::parse(json);
  CHECK(j["mode"] == "run");
  CHECK(j["scenario"] == "constant-f");
  CHECK(j["u"].size() == 36);
  CHECK(j["passed"] == true);
}

TEST_CASE("run scenario: failing assertion is reported, not thrown") {
  ExperimentConfig c = parse_config(
      R"({"surface": {"type": "grid", "n": 4}, "f": {"type": "constant", "value": -1}, "assertions": {"lambda_positive": true}})");
  RunReport r = run_scenario(c);
  CHECK_FALSE(r.passed);
  bool found = false;
  for (const auto& a : r.assertions)
    if (a.name == "lambda_positive") {
      found = true;
      CHECK_FALSE(a.passed);
    }
  CHECK(found);
}

TEST_CASE("branch scenario on a small grid") {
  ExperimentConfig c = parse_config(
      R"({"surface": {"type": "grid", "n": 8}, "f": {"type": "neg-constant-plus-bump", "radius": 0.3}, "lambda_grid": {"start": -1, "stop": 0.4, "step": 0.2}})");
  BranchReport r = run_branch(c);
  CHECK(r.passed);
  CHECK(r.branch.points.size() >= 6);
  auto j = nlohmann::json::parse(branch_json(c, r));
  CHECK(j["mode"] == "branch");
  CHECK(j["points"].size() == r.branch.points.size());

  ExperimentConfig none = parse_config(kMinimal);
  CHECK_THROWS_AS(run_branch(none), ConfigError);
}

TEST_CASE("cli_run writes deterministic outputs") {
  fs::path dir = scratch("cli");
  {
    std::ofstream(dir / "c.json")
        << R"({"surface": {"type": "grid", "n": 5}, "f": {"type": "constant", "value": -1}, "A": 2, "u0": {"type": "random"}})";
  }
  std::ostringstream out, err;
  CliOptions opts{dir / "a", 9, true};
  REQUIRE(cli_run(dir / "c.json", opts, out, err) == kExitPass);
  opts.out = dir / "b";
  REQUIRE(cli_run(dir / "c.json", opts, out, err) == kExitPass);
  for (const char* f : {"trace.csv", "result.json"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK(slurp(dir / "a" / f).find('\r') == std::string::npos);
  }
  auto m = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(m["seed"] == 9);
  CHECK(m["command"] == "run");
  CHECK(m["exit_code"] == 0);
  CHECK(m["config_hash"].get<std::string>().rfind("fnv1a64:", 0) == 0);

  CHECK(cli_run(dir / "missing.json", opts, out, err) == kExitConfig);
  {
    std::ofstream(dir / "bad.json") << "{";
  }
  std::ostringstream err2;
  CHECK(cli_run(dir / "bad.json", opts, out, err2) == kExitConfig);
  CHECK(err2.str().find("line 1") != std::string::npos);
}

TEST_CASE("selftest passes and detects injected faults") {
  auto status = [](const std::vector<CheckResult>& rs, const std::string& name) {
    for (const auto& r : rs)
      if (r.name == name) return r.status;
    FAIL("no check named " << name);
    return CheckStatus::Fail;
  };
  auto clean = run_selftest({});
  CHECK(clean.size() == 12);
  for (const auto& r : clean) CHECK_MESSAGE(r.status == CheckStatus::Pass, r.name << ": " << r.detail);

  auto mutated = run_selftest({.inject_alpha_sign = true});
  CHECK(status(mutated, "additive-invariance") == CheckStatus::Fail);
  CHECK_FALSE(curvflow::testing::alpha_sign_fault());

  auto skewed = run_selftest({.inject_negative_weight_mesh = true});
  CHECK(status(skewed, "max-principle") == CheckStatus::Skip);

  std::ostringstream out;
  CHECK(cli_selftest({.inject_alpha_sign = true}, true, out) == 1);
  CHECK(out.str().find("failed") != std::string::npos);
}
