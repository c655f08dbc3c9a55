#include "curvflow/flow.hpp"
#include "curvflow/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace curvflow {

namespace testing {
namespace {
std::atomic<bool> g_alpha_sign_fault{false};
}
void set_alpha_sign_fault(bool enabled) { g_alpha_sign_fault = enabled; }
bool alpha_sign_fault() { return g_alpha_sign_fault; }
} // namespace testing

void FlowConfig::validate() const {
  if (!(dt_min > 0.0) || !(dt_max >= dt_min)) throw InvalidArgument("flow config: need 0 < dt_min <= dt_max");
  if (dt0 && !(*dt0 > 0.0)) throw InvalidArgument("flow config: dt0 must be positive");
  if (!(tol_F > 0.0) || !(tol_res > 0.0)) throw InvalidArgument("flow config: tolerances must be positive");
  if (max_steps < 0) throw InvalidArgument("flow config: max_steps must be nonnegative");
  if (picard_iters < 1) throw InvalidArgument("flow config: picard_iters must be at least 1");
}

ScalarField project_to_volume(const DiscreteSurface& surf, const ScalarField& u, double A) {
  double vol = conformal_volume(surf, u);
  return (u.array() + 0.5 * std::log(A / vol)).matrix();
}

FlowState make_state(const DiscreteSurface& surf, ScalarField f, double A, std::optional<ScalarField> u0) {
  if (!(A > 0.0)) throw InvalidArgument("target volume A must be positive");
  require_size(surf, f, "prescription f");
  FlowState s;
  s.A = A;
  s.kbar = surf.kbar;
  s.f = std::move(f);
  if (u0) {
    require_size(surf, *u0, "initial conformal factor");
    s.u = std::move(*u0);
  } else {
    s.u = ScalarField::Constant(surf.n(), 0.5 * std::log(A));
  }
  return s;
}

double alpha(const DiscreteSurface& surf, const FlowState& state) {
  return (integrate(surf, state.f.cwiseProduct(exp2u(state.u))) - state.kbar) / state.A;
}

double energy(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f) {
  require_size(surf, f, "energy");
  return 0.5 * dirichlet_energy(surf, u) + surf.kbar * integrate(surf, u) -
         0.5 * integrate(surf, f.cwiseProduct(exp2u(u)));
}

double energy(const DiscreteSurface& surf, const FlowState& state) { return energy(surf, state.u, state.f); }

double compute_lambda(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f, double A) {
  return (surf.kbar - integrate(surf, f.cwiseProduct(exp2u(u)))) / A;
}

ScalarField static_residual_field(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f,
                                  double lambda) {
  ScalarField r = -laplacian(surf, u);
  ScalarField e = exp2u(u);
  for (int i = 0; i < surf.n(); ++i) r[i] += surf.kbar - (f[i] + lambda) * e[i];
  return r;
}

StaticResidual static_residual(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f,
                               double lambda) {
  ScalarField r = static_residual_field(surf, u, f, lambda);
  return {r.lpNorm<Eigen::Infinity>(), std::sqrt(integrate(surf, r.cwiseAbs2()))};
}

namespace {
double curvature_misfit(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f, double lambda) {
  ScalarField k = gauss_curvature(surf, u);
  ScalarField m = k - f - ScalarField::Constant(surf.n(), lambda);
  return std::sqrt(integrate(surf, m.cwiseAbs2()));
}
} // namespace

FlowDiagnostics diagnostics(const DiscreteSurface& surf, const FlowState& state) {
  FlowDiagnostics d{};
  d.volume = conformal_volume(surf, state.u);
  d.ubar = integrate(surf, state.u);
  d.half_log_A = 0.5 * std::log(state.A);
  d.alpha = alpha(surf, state);
  d.alpha0 = state.f.cwiseAbs().maxCoeff() + std::abs(state.kbar) / state.A;
  d.energy = energy(surf, state);
  d.F = state.last_F;
  ScalarField k = gauss_curvature(surf, state.u);
  d.k_min = k.minCoeff();
  d.k_max = k.maxCoeff();
  d.gb_residual = gauss_bonnet_residual(surf, state.u);
  return d;
}

double short_time_bound(const FlowState& state) {
  double grow = std::exp(2.0 * (state.u.cwiseAbs().maxCoeff() + 1.0));
  double fmax = state.f.cwiseAbs().maxCoeff();
  return 1.0 / (std::abs(state.kbar) * grow + fmax * (1.0 + grow / state.A));
}

FlowStepper::FlowStepper(const DiscreteSurface& surf) : surf_(surf), solver_(surf) {}

StepOutcome FlowStepper::step(const FlowState& state, double dt, int picard_iters, bool project_volume) {
  if (!(dt > 0.0)) throw InvalidArgument("flow step: dt must be positive");
  require_size(surf_, state.u, "flow step u");
  require_size(surf_, state.f, "flow step f");
  const int n = surf_.n();
  const double invA = 1.0 / state.A;
  const double sign = testing::alpha_sign_fault() ? -1.0 : 1.0;

  LinearStepProblem prob;
  prob.dt = dt;
  prob.c = ScalarField::Zero(n);
  ScalarField v = state.u;
  ScalarField w;
  for (int k = 0; k < std::max(1, picard_iters); ++k) {
    ScalarField e = exp2u(v);
    double normalization = invA * integrate(surf_, state.f.cwiseProduct(e));
    prob.a = e.cwiseInverse();
    prob.d.resize(n);
    for (int i = 0; i < n; ++i)
      prob.d[i] = state.kbar * (invA - prob.a[i]) + state.f[i] - sign * normalization;
    w = solver_.solve(prob, state.u).w;
    v = w;
  }

  StepOutcome out;
  out.unprojected = w;
  if (project_volume) w = project_to_volume(surf_, w, state.A);

  ScalarField vel = (w - state.u) / dt;
  out.F = integrate(surf_, exp2u(w).cwiseProduct(vel.cwiseAbs2()));
  out.state = state;
  out.state.u = std::move(w);
  out.state.t = state.t + dt;
  out.state.last_F = out.F;
  out.state.last_dt = dt;
  return out;
}

FlowResult FlowStepper::run(const FlowState& initial, const FlowConfig& config) {
  config.validate();
  FlowResult res;
  FlowState state = initial;

  double dt = std::clamp(config.dt0.value_or(short_time_bound(initial)), config.dt_min, config.dt_max);
  double E = energy(surf_, state);

  auto record = [&](double stepDt, double F) {
    TraceRow row{};
    row.t = state.t;
    row.dt = stepDt;
    row.E = E;
    row.F = F;
    row.alpha = alpha(surf_, state);
    row.volume = conformal_volume(surf_, state.u);
    row.umin = state.u.minCoeff();
    row.umax = state.u.maxCoeff();
    row.gb_residual = gauss_bonnet_residual(surf_, state.u);
    row.ubar = integrate(surf_, state.u);
    res.trace.push_back(row);
  };
  record(0.0, 0.0);

  int sinceGrowth = 0;
  res.stop_reason = "max_steps";
  while (res.steps < config.max_steps) {
    StepOutcome out;
    try {
      out = step(state, dt, config.picard_iters, config.project_volume);
    } catch (const SolverError&) {
      out.state.u.resize(0);
    } catch (const NumericRangeError&) {
      out.state.u.resize(0);
    }
    double Enew = out.state.u.size() ? energy(surf_, out.state) : INFINITY;
    if (!std::isfinite(Enew) || Enew > E + 1e-12 * (1.0 + std::abs(E))) {
      ++res.rejected_steps;
      sinceGrowth = 0;
      dt *= 0.5;
      if (dt < config.dt_min) {
        res.stop_reason = "step size underflow";
        break;
      }
      continue;
    }

    state = std::move(out.state);
    E = Enew;
    ++res.steps;
    record(dt, out.F);
    if (++sinceGrowth >= 5) {
      dt = std::min(dt * 1.2, config.dt_max);
      sinceGrowth = 0;
    }

    if (out.F <= config.tol_F) {
      double lam = compute_lambda(surf_, state.u, state.f, state.A);
      StaticResidual r = static_residual(surf_, state.u, state.f, lam);
      if (r.inf <= config.tol_res && curvature_misfit(surf_, state.u, state.f, lam) <= config.tol_res) {
        res.converged = true;
        res.stop_reason = "converged";
        break;
      }
    }
  }

  res.u_inf = state.u;
  res.lambda = compute_lambda(surf_, state.u, state.f, state.A);
  StaticResidual r = static_residual(surf_, state.u, state.f, res.lambda);
  res.residual = r.inf;
  res.residual_l2 = r.l2;
  res.curvature_misfit = curvature_misfit(surf_, state.u, state.f, res.lambda);
  res.final_F = state.last_F;
  res.t = state.t;
  return res;
}

StepOutcome step(const DiscreteSurface& surf, const FlowState& state, double dt, int picard_iters,
                 bool project_volume) {
  FlowStepper stepper(surf);
  return stepper.step(state, dt, picard_iters, project_volume);
}

FlowResult run(const DiscreteSurface& surf, const FlowState& initial, const FlowConfig& config) {
  FlowStepper stepper(surf);
  return stepper.run(initial, config);
}

} // namespace curvflow
