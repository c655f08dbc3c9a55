#include "curvflow/harness/scenarios.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#ifndef CURVFLOW_VERSION
#define CURVFLOW_VERSION "0.0.0"
#endif

namespace curvflow::harness {

using nlohmann::json;

namespace {

AssertionOutcome outcome(std::string name, bool passed, std::string detail) {
  return {std::move(name), passed, std::move(detail)};
}

std::string fmt(double x) { return format_double(x); }

json to_json(const ScalarField& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const std::vector<AssertionOutcome>& list) {
  json a = json::array();
  for (const auto& o : list) a.push_back({{"name", o.name}, {"passed", o.passed}, {"detail", o.detail}});
  return a;
}

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

// Energy monotonicity and the uniform alpha / mean(u) bounds on a trace.
std::vector<AssertionOutcome> trace_bounds(const std::vector<TraceRow>& trace, const ScalarField& f, double kbar,
                                           double A) {
  const double alpha0 = f.cwiseAbs().maxCoeff() + std::abs(kbar) / A;
  const double ubarMax = 0.5 * std::log(A);
  double worstAlpha = 0.0, worstUbar = -INFINITY, worstRise = -INFINITY;
  for (size_t k = 0; k < trace.size(); ++k) {
    worstAlpha = std::max(worstAlpha, std::abs(trace[k].alpha));
    worstUbar = std::max(worstUbar, trace[k].ubar);
    if (k > 0) {
      double allowed = 1e-12 * (1.0 + std::abs(trace[k - 1].E));
      worstRise = std::max(worstRise, trace[k].E - trace[k - 1].E - allowed);
    }
  }
  std::vector<AssertionOutcome> out;
  out.push_back(outcome("alpha_bound", worstAlpha <= alpha0 + 1e-12,
                        "max |alpha| = " + fmt(worstAlpha) + ", bound " + fmt(alpha0)));
  out.push_back(outcome("ubar_bound", worstUbar <= ubarMax + 1e-12,
                        "max mean(u) = " + fmt(worstUbar) + ", bound " + fmt(ubarMax)));
  out.push_back(outcome("energy_monotone", trace.size() < 2 || worstRise <= 0.0,
                        trace.size() < 2 ? "no accepted steps" : "largest excess rise " + fmt(std::max(0.0, worstRise))));
  return out;
}

std::string manifest_json(const std::string& command, const std::filesystem::path& configPath,
                          const ExperimentConfig& cfg, const std::vector<std::string>& files, int exitCode,
                          double wallSeconds) {
  json m;
  m["tool"] = "curvflow";
  m["version"] = CURVFLOW_VERSION;
  m["command"] = command;
  m["config_path"] = configPath.string();
  m["config_hash"] = "fnv1a64:" + fnv1a_hex(cfg.canonical);
  m["scenario"] = cfg.scenario;
  m["seed"] = cfg.seed;
  m["versions"] = {
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
      {"compiler", __VERSION__},
  };
  m["outputs"] = files;
  m["exit_code"] = exitCode;
  m["wall_time_seconds"] = wallSeconds;
  return m.dump(2) + "\n";
}

std::filesystem::path output_dir(const ExperimentConfig& cfg, const CliOptions& opts) {
  if (opts.out) return *opts.out;
  if (cfg.output_dir) return *cfg.output_dir;
  return "curvflow-out";
}

// Parses the config and applies CLI overrides; reports errors as exit 2.
std::optional<ExperimentConfig> prepare(const std::filesystem::path& path, const CliOptions& opts,
                                        std::ostream& err) {
  try {
    ExperimentConfig cfg = load_config(path);
    if (opts.seed) cfg.seed = *opts.seed;
    return cfg;
  } catch (const ConfigError& e) {
    err << "config error: " << path.string() << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

} // namespace

RunReport run_scenario(const ExperimentConfig& cfg) {
  RunReport rep;
  DiscreteSurface surf;
  ScalarField u0;
  try {
    surf = build_surface(cfg, &rep.warnings);
    rep.f = build_f(cfg, surf);
    u0 = build_u0(cfg, surf);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  FlowStepper stepper(surf);
  rep.flow = stepper.run(make_state(surf, rep.f, cfg.A, u0), cfg.flow);
  rep.volume = conformal_volume(surf, rep.flow.u_inf);
  try {
    rep.stab_eig = stability_eigenvalue(surf, rep.flow.u_inf, rep.f, rep.flow.lambda);
  } catch (const Error& e) {
    rep.warnings.push_back(std::string("stability eigenvalue unavailable: ") + e.what());
  }

  const Assertions& a = cfg.assertions;
  const FlowResult& r = rep.flow;
  if (a.converged)
    rep.assertions.push_back(outcome("converged", r.converged,
                                     r.stop_reason + " after " + std::to_string(r.steps) + " steps, F = " +
                                         fmt(r.final_F) + ", residual = " + fmt(r.residual)));
  if (a.flow_bounds) {
    auto bounds = trace_bounds(r.trace, rep.f, surf.kbar, cfg.A);
    rep.assertions.insert(rep.assertions.end(), bounds.begin(), bounds.end());
  }
  if (a.lambda_expected)
    rep.assertions.push_back(outcome("lambda_expected", std::abs(r.lambda - *a.lambda_expected) <= a.lambda_tol,
                                     "lambda = " + fmt(r.lambda) + ", expected " + fmt(*a.lambda_expected) +
                                         " +- " + fmt(a.lambda_tol)));
  if (a.u_constant_tol) {
    double dev = (r.u_inf.array() - 0.5 * std::log(cfg.A)).abs().maxCoeff();
    rep.assertions.push_back(outcome("u_constant", dev <= *a.u_constant_tol,
                                     "|u - log(A)/2|_inf = " + fmt(dev) + ", tolerance " + fmt(*a.u_constant_tol)));
  }
  if (a.lambda_positive)
    rep.assertions.push_back(outcome("lambda_positive", r.lambda > 0.0, "lambda = " + fmt(r.lambda)));
  if (a.stab_eig_negative)
    rep.assertions.push_back(outcome("stab_eig_negative", rep.stab_eig && *rep.stab_eig < 0.0,
                                     rep.stab_eig ? "stab_eig = " + fmt(*rep.stab_eig) : "not computed"));

  rep.passed = true;
  for (const auto& o : rep.assertions) rep.passed = rep.passed && o.passed;
  return rep;
}

BranchReport run_branch(const ExperimentConfig& cfg) {
  if (cfg.lambda_grid.empty()) throw ConfigError("branch needs a \"lambda_grid\"", "/lambda_grid");
  BranchReport rep;
  DiscreteSurface surf;
  ScalarField f;
  try {
    surf = build_surface(cfg, &rep.warnings);
    f = build_f(cfg, surf);
    rep.branch = continue_branch(surf, f, cfg.lambda_grid);
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  } catch (const MeshError& e) {
    throw ConfigError(e.what());
  }

  const auto& pts = rep.branch.points;
  rep.assertions.push_back(outcome("branch_nonempty", !pts.empty(),
                                   std::to_string(pts.size()) + " points, " + rep.branch.stop_reason));
  if (cfg.assertions.branch_monotone) {
    bool volumeOk = true, pointwiseOk = true;
    std::string where;
    for (size_t k = 1; k < pts.size(); ++k) {
      if (!(pts[k].volume > pts[k - 1].volume)) {
        volumeOk = false;
        where = "V not increasing at lambda = " + fmt(pts[k].lambda);
      }
      if (!((pts[k].u - pts[k - 1].u).minCoeff() > 0.0)) {
        pointwiseOk = false;
        where = "u not pointwise increasing at lambda = " + fmt(pts[k].lambda);
      }
    }
    rep.assertions.push_back(outcome("volume_increasing", volumeOk, volumeOk ? "strictly increasing" : where));
    rep.assertions.push_back(outcome("u_pointwise_increasing", pointwiseOk, pointwiseOk ? "strictly increasing" : where));
  }
  if (cfg.assertions.branch_stable_below_zero) {
    double worst = INFINITY;
    for (const auto& p : pts)
      if (p.lambda <= 0.0) worst = std::min(worst, p.stab_eig);
    bool ok = !(worst <= 0.0);
    rep.assertions.push_back(outcome("stable_for_nonpositive_lambda", ok,
                                     std::isinf(worst) ? "no points with lambda <= 0" : "min stab_eig = " + fmt(worst)));
  }
  rep.passed = true;
  for (const auto& o : rep.assertions) rep.passed = rep.passed && o.passed;
  return rep;
}

std::string result_json(const ExperimentConfig& cfg, const RunReport& rep) {
  const FlowResult& r = rep.flow;
  json j;
  j["mode"] = "run";
  j["scenario"] = cfg.scenario;
  j["u"] = to_json(r.u_inf);
  j["lambda"] = r.lambda;
  j["residual_inf"] = r.residual;
  j["residual_l2"] = r.residual_l2;
  j["steps"] = r.steps;
  j["converged"] = r.converged;
  j["rejected_steps"] = r.rejected_steps;
  j["stop_reason"] = r.stop_reason;
  j["t"] = r.t;
  j["final_F"] = r.final_F;
  j["curvature_misfit"] = r.curvature_misfit;
  j["volume"] = rep.volume;
  j["A"] = cfg.A;
  j["stab_eig"] = optional_number(rep.stab_eig);
  j["assertions"] = to_json(rep.assertions);
  j["warnings"] = rep.warnings;
  j["passed"] = rep.passed;
  return j.dump(2) + "\n";
}

std::string branch_json(const ExperimentConfig& cfg, const BranchReport& rep) {
  json j;
  j["mode"] = "branch";
  j["scenario"] = cfg.scenario;
  json pts = json::array();
  for (const auto& p : rep.branch.points)
    pts.push_back({{"lambda", p.lambda},
                   {"V", p.volume},
                   {"stab_eig", p.stab_eig},
                   {"newton_iters", p.newton_iters},
                   {"res_inf", p.residual},
                   {"u", to_json(p.u)}});
  j["points"] = std::move(pts);
  j["truncated"] = rep.branch.truncated;
  j["last_stable_lambda"] = optional_number(rep.branch.last_stable_lambda);
  j["stop_lambda"] = optional_number(rep.branch.stop_lambda);
  j["stop_reason"] = rep.branch.stop_reason;
  j["assertions"] = to_json(rep.assertions);
  j["warnings"] = rep.warnings;
  j["passed"] = rep.passed;
  return j.dump(2) + "\n";
}

namespace {

void print_assertions(const std::vector<AssertionOutcome>& list, std::ostream& out) {
  for (const auto& o : list) out << "  [" << (o.passed ? "PASS" : "FAIL") << "] " << o.name << ": " << o.detail << "\n";
}

template <class Body>
int guarded(const std::filesystem::path& config, const CliOptions& opts, std::ostream& err, Body body) {
  auto start = std::chrono::steady_clock::now();
  auto cfg = prepare(config, opts, err);
  if (!cfg) return kExitConfig;
  try {
    return body(*cfg, start);
  } catch (const ConfigError& e) {
    err << "config error: " << config.string() << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitAssertion;
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

int cli_run(const std::filesystem::path& config, const CliOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(config, opts, err, [&](const ExperimentConfig& cfg, auto start) {
    RunReport rep = run_scenario(cfg);
    std::filesystem::path dir = output_dir(cfg, opts);
    std::filesystem::create_directories(dir);
    write_file(dir / "trace.csv", trace_csv(rep.flow.trace));
    write_file(dir / "result.json", result_json(cfg, rep));
    int code = rep.passed ? kExitPass : kExitAssertion;
    write_file(dir / "manifest.json",
               manifest_json("run", config, cfg, {"trace.csv", "result.json", "manifest.json"}, code,
                             seconds_since(start)));
    if (!opts.quiet) {
      for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
      out << "scenario " << cfg.scenario << ": " << rep.flow.stop_reason << ", steps " << rep.flow.steps
          << ", lambda " << fmt(rep.flow.lambda) << ", residual " << fmt(rep.flow.residual) << "\n";
      print_assertions(rep.assertions, out);
      out << (rep.passed ? "PASS" : "FAIL") << " (outputs in " << dir.string() << ")\n";
    }
    return code;
  });
}

int cli_branch(const std::filesystem::path& config, const CliOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(config, opts, err, [&](const ExperimentConfig& cfg, auto start) {
    BranchReport rep = run_branch(cfg);
    std::filesystem::path dir = output_dir(cfg, opts);
    std::filesystem::create_directories(dir);
    write_file(dir / "branch.csv", branch_csv(rep.branch));
    write_file(dir / "result.json", branch_json(cfg, rep));
    int code = rep.passed ? kExitPass : kExitAssertion;
    write_file(dir / "manifest.json",
               manifest_json("branch", config, cfg, {"branch.csv", "result.json", "manifest.json"}, code,
                             seconds_since(start)));
    if (!opts.quiet) {
      for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
      if (rep.branch.truncated)
        err << "branch truncated at lambda = " << fmt(rep.branch.stop_lambda.value_or(NAN)) << ": "
            << rep.branch.stop_reason << "\n";
      out << "branch: " << rep.branch.points.size() << " points";
      if (rep.branch.last_stable_lambda) out << ", last stable lambda " << fmt(*rep.branch.last_stable_lambda);
      out << "\n";
      print_assertions(rep.assertions, out);
      out << (rep.passed ? "PASS" : "FAIL") << " (outputs in " << dir.string() << ")\n";
    }
    return code;
  });
}

} // namespace curvflow::harness
