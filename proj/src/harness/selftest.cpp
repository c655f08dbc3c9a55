#include "curvflow/harness/selftest.hpp"
#include "curvflow/errors.hpp"
#include "curvflow/fields.hpp"
#include "curvflow/flow.hpp"
#include "curvflow/harness/output.hpp"
#include "curvflow/linpar.hpp"
#include "curvflow/statics.hpp"
#include "curvflow/surface.hpp"

#include <Eigen/LU>

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace curvflow::harness {

namespace {

struct Verdict {
  CheckStatus status;
  std::string detail;
};

Verdict check(bool ok, std::string d) { return {ok ? CheckStatus::Pass : CheckStatus::Fail, std::move(d)}; }

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

ScalarField random_field(int n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  ScalarField u(n);
  for (int i = 0; i < n; ++i) u[i] = d(rng);
  return u;
}

ScalarField trig(const DiscreteSurface& g, double ax, double ay) {
  const double tau = 2.0 * std::numbers::pi;
  ScalarField out(g.n());
  for (int i = 0; i < g.n(); ++i)
    out[i] = ax * std::cos(tau * g.positions(i, 0)) + ay * std::cos(tau * g.positions(i, 1));
  return out;
}

double inf_diff(const ScalarField& a, const ScalarField& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

// Nearly flat double pyramid: the equatorial edges get negative cotangent
// weights, so the surface is flagged non-Delaunay.
DiscreteSurface flat_bipyramid() {
  Eigen::MatrixX3d p(5, 3);
  p << 1, 0, 0, -0.5, 0.8660254037844386, 0, -0.5, -0.8660254037844386, 0, 0, 0, 0.05, 0, 0, -0.05;
  std::vector<std::array<int, 3>> faces{{0, 1, 3}, {1, 2, 3}, {2, 0, 3}, {1, 0, 4}, {2, 1, 4}, {0, 2, 4}};
  return surface_from_triangles(p, faces, {.kbar = -1.0, .allow_nonnegative_euler = true}).surface;
}

Verdict surface_identities() {
  std::mt19937_64 rng(1);
  double worstGB = 0.0, worstRow = 0.0, worstSym = 0.0;
  for (const DiscreteSurface& s : {build_periodic_grid(16, -2.0), build_two_vertex(1.3, -1.0)}) {
    Eigen::VectorXd rows = s.stiffness * Eigen::VectorXd::Ones(s.n());
    worstRow = std::max(worstRow, rows.lpNorm<Eigen::Infinity>());
    SparseMatrix t = s.stiffness.transpose();
    worstSym = std::max(worstSym, (SparseMatrix(s.stiffness - t)).coeffs().cwiseAbs().maxCoeff());
    for (int k = 0; k < 20; ++k)
      worstGB = std::max(worstGB, gauss_bonnet_residual(s, random_field(s.n(), rng, -1, 1)) / std::abs(s.kbar));
  }
  return check(worstGB <= 1e-12 && worstRow == 0.0 && worstSym == 0.0,
               "Gauss-Bonnet rel " + fmt(worstGB) + ", row sums " + fmt(worstRow) + ", asymmetry " + fmt(worstSym));
}

Verdict linear_step_2x2() {
  auto s = build_two_vertex(1.7, -1.0);
  LinearStepProblem p{Eigen::Vector2d(0.6, 2.5), Eigen::Vector2d::Zero(), Eigen::Vector2d(1.0, -3.0), 0.2};
  Eigen::Vector2d u(0.3, -0.8);
  Eigen::Matrix2d m;
  double m0 = 0.5 / p.a[0], m1 = 0.5 / p.a[1];
  m << m0 / p.dt + 1.7, -1.7, -1.7, m1 / p.dt + 1.7;
  Eigen::Vector2d rhs(m0 * (u[0] / p.dt + p.d[0]), m1 * (u[1] / p.dt + p.d[1]));
  double err = inf_diff(step_implicit(s, p, u), m.inverse() * rhs);
  return check(err <= 1e-12, "difference " + fmt(err));
}

Verdict max_principle(bool negativeWeights) {
  DiscreteSurface s = negativeWeights ? flat_bipyramid() : build_periodic_grid(8, -1.0);
  std::mt19937_64 rng(2);
  int violations = 0, skipped = 0, recorded = 0;
  std::string notice;
  for (int t = 0; t < 100; ++t) {
    LinearStepProblem p{random_field(s.n(), rng, 0.1, 5.0), ScalarField::Zero(s.n()),
                        random_field(s.n(), rng, -2.0, 2.0), std::uniform_real_distribution<double>(1e-3, 2.0)(rng)};
    ScalarField u = random_field(s.n(), rng, -3.0, 3.0);
    MaxPrincipleReport r = check_max_principle(s, p, u, step_implicit(s, p, u));
    if (!r.applicable) {
      ++skipped;
      recorded += !r.passed;
      notice = r.notice;
    } else if (!r.passed) {
      ++violations;
    }
  }
  if (skipped == 100) return {CheckStatus::Skip, notice + " (" + std::to_string(recorded) + " of 100 exceed the bound)"};
  return check(violations == 0, std::to_string(violations) + " violations in " + std::to_string(100 - skipped) +
                                     " problems");
}

Verdict volume_preservation() {
  auto g = build_periodic_grid(12, -1.0);
  const double A = 2.0;
  FlowState s = make_state(g, trig(g, -1.0, 0.5), A, project_to_volume(g, trig(g, 0.2, -0.1), A));
  FlowStepper stepper(g);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    s = stepper.step(s, 0.01).state;
    worst = std::max(worst, std::abs(conformal_volume(g, s.u) - A) / A);
  }
  auto two = build_two_vertex(1.0, -1.0);
  FlowState s0 = make_state(two, Eigen::Vector2d(-1.0, -2.0), 1.0,
                            project_to_volume(two, Eigen::Vector2d(0.3, -0.3), 1.0));
  auto drift = [&](double dt) {
    FlowStepper st(two);
    FlowState x = s0;
    for (long k = 0, n = std::lround(1.0 / dt); k < n; ++k) x = st.step(x, dt, 1, false).state;
    return std::abs(conformal_volume(two, x.u) - 1.0);
  };
  double ratio = drift(0.01) / drift(0.005);
  return check(worst <= 1e-12 && ratio >= 1.8,
               "projected drift " + fmt(worst) + ", unprojected halving ratio " + fmt(ratio));
}

Verdict additive_invariance() {
  auto g = build_periodic_grid(10, -1.0);
  const double A = 1.0, c = 3.7;
  ScalarField f = trig(g, -0.8, 0.6);
  ScalarField fc = (f.array() + c).matrix();
  FlowState a = make_state(g, f, A, project_to_volume(g, trig(g, 0.1, 0.3), A));
  FlowState b = make_state(g, fc, A, a.u);
  FlowStepper sa(g), sb(g);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    StepOutcome oa = sa.step(a, 0.02), ob = sb.step(b, 0.02);
    // Compare before the volume shift too: the shift would hide any
    // constant offset in the source.
    worst = std::max({worst, inf_diff(oa.state.u, ob.state.u), inf_diff(oa.unprojected, ob.unprojected)});
    a = std::move(oa.state);
    b = std::move(ob.state);
  }
  return check(worst <= 1e-12, "max difference " + fmt(worst));
}

Verdict energy_monotone() {
  auto g = build_periodic_grid(12, -1.0);
  FlowState s = make_state(g, trig(g, -1.0, 0.7), 3.0, project_to_volume(g, trig(g, 0.5, 0.2), 3.0));
  FlowConfig cfg;
  cfg.max_steps = 300;
  FlowResult r = run(g, s, cfg);
  double worst = -INFINITY;
  for (size_t k = 1; k < r.trace.size(); ++k)
    worst = std::max(worst, r.trace[k].E - r.trace[k - 1].E - 1e-12 * (1.0 + std::abs(r.trace[k - 1].E)));
  return check(worst <= 0.0 && r.trace.size() > 1, std::to_string(r.steps) + " steps, worst excess " + fmt(worst));
}

Verdict constant_f() {
  auto g = build_periodic_grid(8, -1.0);
  std::mt19937_64 rng(3);
  double worstU = 0.0, worstL = 0.0;
  bool conv = true;
  for (double A : {0.5, 1.0, 4.0}) {
    const double c = -0.4;
    FlowResult r = run(g, make_state(g, ScalarField::Constant(g.n(), c), A,
                                     project_to_volume(g, random_field(g.n(), rng, -0.3, 0.3), A)),
                       {});
    conv = conv && r.converged && r.final_F <= 1e-10;
    worstU = std::max(worstU, (r.u_inf.array() - 0.5 * std::log(A)).abs().maxCoeff());
    worstL = std::max(worstL, std::abs(r.lambda - (-1.0 / A - c)));
  }
  return check(conv && worstU <= 1e-7 && worstL <= 1e-9, "u error " + fmt(worstU) + ", lambda error " + fmt(worstL));
}

Verdict oracle_two_vertex() {
  auto two = build_two_vertex(1.0, -1.0);
  const double A = 1.0, dt = 1e-4, dtRef = 1e-6;
  Eigen::Vector2d f(-1.0, -2.0);
  FlowState s = make_state(two, f, A, project_to_volume(two, Eigen::Vector2d(0.01, -0.01), A));
  FlowState ref = s;
  FlowStepper stepper(two);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    s = stepper.step(s, dt).state;
    for (int j = 0; j < 100; ++j) {
      Eigen::Vector2d vel = f - gauss_curvature(two, ref.u) - Eigen::Vector2d::Constant(alpha(two, ref));
      ref.u += dtRef * vel;
    }
    worst = std::max(worst, inf_diff(s.u, ref.u));
  }
  return check(worst <= 1e-5, "sup difference on [0, 1]: " + fmt(worst));
}

Verdict static_uniqueness() {
  auto g = build_periodic_grid(8, -1.0);
  ScalarField f = evaluate(CappedMaxZeroField{.base = -1.0, .amplitude = 0.5, .kx = 1, .ky = 1, .offset = 0.1}, g);
  std::mt19937_64 rng(4);
  NewtonReport first = solve_f_nonpositive(g, f);
  double worst = 0.0;
  bool conv = first.converged;
  for (int k = 0; k < 5; ++k) {
    NewtonReport r = solve_f_nonpositive(g, f, random_field(g.n(), rng, -2.0, 2.0));
    conv = conv && r.converged;
    worst = std::max(worst, inf_diff(r.u, first.u));
  }
  return check(conv && worst <= 1e-8, "spread " + fmt(worst));
}

Verdict stability_constant() {
  auto g = build_periodic_grid(8, -1.3);
  const double A = 2.0, c = 0.2;
  double nu = stability_eigenvalue(g, ScalarField::Constant(g.n(), 0.5 * std::log(A)), ScalarField::Constant(g.n(), c),
                                   -1.3 / A - c);
  return check(std::abs(nu - 2.6) <= 1e-8, "nu = " + fmt(nu) + ", expected 2.6");
}

Verdict branch_monotone() {
  auto g = build_periodic_grid(8, -1.0);
  ScalarField f = evaluate(NegConstantPlusBumpField{.c = 1.0, .height = 1.0, .center = {0.5, 0.5, 0.0}, .radius = 0.3}, g);
  std::vector<double> grid;
  for (int k = 0; k <= 30; ++k) grid.push_back(-1.0 + 0.1 * k);
  BranchResult b = continue_branch(g, f, grid);
  bool ok = b.points.size() > 5;
  for (size_t k = 1; k < b.points.size(); ++k)
    ok = ok && b.points[k].volume > b.points[k - 1].volume && (b.points[k].u - b.points[k - 1].u).minCoeff() > 0.0;
  for (const auto& p : b.points)
    if (p.lambda <= 0.0) ok = ok && p.stab_eig > 0.0;
  return check(ok, std::to_string(b.points.size()) + " points, " + b.stop_reason);
}

Verdict limit_consistency() {
  auto g = build_periodic_grid(10, -1.0);
  const double A = 2.0;
  ScalarField f = (trig(g, 0.5, 0.3).array() - 1.0).matrix();
  FlowConfig cfg;
  FlowResult r = run(g, make_state(g, f, A), cfg);
  if (!r.converged) return check(false, "flow did not converge: " + r.stop_reason);
  ConstrainedSolution p = newton_polish_constrained(g, f, r.u_inf, A);
  double du = inf_diff(p.u, r.u_inf);
  return check(r.residual <= cfg.tol_res && r.curvature_misfit <= cfg.tol_res && p.converged && du <= 1e-6,
               "residual " + fmt(r.residual) + ", misfit " + fmt(r.curvature_misfit) + ", polish shift " + fmt(du));
}

struct FaultGuard {
  explicit FaultGuard(bool on) { curvflow::testing::set_alpha_sign_fault(on); }
  ~FaultGuard() { curvflow::testing::set_alpha_sign_fault(false); }
};

} // namespace

const char* to_string(CheckStatus s) {
  switch (s) {
  case CheckStatus::Pass: return "PASS";
  case CheckStatus::Skip: return "SKIP";
  default: return "FAIL";
  }
}

std::vector<CheckResult> run_selftest(const SelftestOptions& opts) {
  FaultGuard guard(opts.inject_alpha_sign);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> checks{
      {"surface-identities", surface_identities},
      {"linear-step-2x2", linear_step_2x2},
      {"max-principle", [&] { return max_principle(opts.inject_negative_weight_mesh); }},
      {"volume-preservation", volume_preservation},
      {"additive-invariance", additive_invariance},
      {"energy-monotone", energy_monotone},
      {"constant-f", constant_f},
      {"oracle-two-vertex", oracle_two_vertex},
      {"static-uniqueness", static_uniqueness},
      {"stability-constant", stability_constant},
      {"branch-monotone", branch_monotone},
      {"limit-consistency", limit_consistency},
  };
  std::vector<CheckResult> out;
  for (const auto& [name, fn] : checks) {
    auto start = std::chrono::steady_clock::now();
    CheckResult r{name, CheckStatus::Fail, {}, 0.0};
    try {
      Verdict v = fn();
      r.status = v.status;
      r.detail = std::move(v.detail);
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_table(const std::vector<CheckResult>& results) {
  size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::ostringstream s;
  auto pad = [&](const std::string& x) { return x + std::string(width - x.size(), ' '); };
  s << pad("check") << "  status  time_s  detail\n";
  for (const auto& r : results) {
    char t[16];
    std::snprintf(t, sizeof t, "%6.2f", r.seconds);
    s << pad(r.name) << "  " << to_string(r.status) << "    " << t << "  " << r.detail << "\n";
  }
  return s.str();
}

int cli_selftest(const SelftestOptions& opts, bool quiet, std::ostream& out) {
  auto results = run_selftest(opts);
  int failed = 0, skipped = 0;
  for (const auto& r : results) {
    failed += r.status == CheckStatus::Fail;
    skipped += r.status == CheckStatus::Skip;
  }
  if (!quiet) out << format_table(results);
  out << "selftest: " << results.size() - failed - skipped << " passed, " << failed << " failed, " << skipped
      << " skipped\n";
  return failed == 0 ? 0 : 1;
}

} // namespace curvflow::harness
