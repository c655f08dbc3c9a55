#pragma once

#include "curvflow/linpar.hpp"
#include "curvflow/surface.hpp"

#include <optional>
#include <string>
#include <vector>

namespace curvflow {

/// Moving point of the additively normalized curvature flow
///   du/dt = f - K_g - alpha(t),  alpha = (1/A)(int f e^{2u} - kbar),
/// which keeps the conformal volume at A.
struct FlowState {
  double t = 0.0;
  ScalarField u;
  ScalarField f;
  double A = 1.0;
  double kbar = -1.0;

  // Cached from the last step.
  double last_F = 0.0;
  double last_dt = 0.0;
};

/// u0 = (1/2) log A, the unique constant member of the constraint set.
FlowState make_state(const DiscreteSurface& surf, ScalarField f, double A, std::optional<ScalarField> u0 = {});

/// Shifts u by a constant so that its conformal volume equals A.
ScalarField project_to_volume(const DiscreteSurface& surf, const ScalarField& u, double A);

struct FlowConfig {
  std::optional<double> dt0;  // defaults to short_time_bound()
  double dt_min = 1e-10;
  double dt_max = 0.5;
  double tol_F = 1e-10;
  double tol_res = 1e-8;
  int max_steps = 200000;
  int picard_iters = 1;
  bool project_volume = true;

  void validate() const;
};

struct TraceRow {
  double t, dt, E, F, alpha, volume, umin, umax, gb_residual, ubar;
};

struct FlowResult {
  ScalarField u_inf;
  double lambda = 0.0;
  double residual = 0.0;      // inf-norm static residual
  double residual_l2 = 0.0;   // area-weighted 2-norm
  double curvature_misfit = 0.0;  // weighted 2-norm of K_g - (f + lambda)
  double final_F = 0.0;
  double t = 0.0;
  int steps = 0;
  int rejected_steps = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<TraceRow> trace;
};

struct StepOutcome {
  FlowState state;
  double F = 0.0;
  ScalarField unprojected;  // w before the volume shift
};

struct StaticResidual {
  double inf = 0.0;
  double l2 = 0.0;
};

struct FlowDiagnostics {
  double volume, ubar, half_log_A, alpha, alpha0, energy, F, k_min, k_max, gb_residual;
};

double alpha(const DiscreteSurface& surf, const FlowState& state);

/// E_f(u) = 1/2 u^T S u + kbar * mean(u) - 1/2 sum a f e^{2u}.
double energy(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f);
double energy(const DiscreteSurface& surf, const FlowState& state);

/// lambda = (1/A)(kbar - sum a f e^{2u}); equals -alpha.
double compute_lambda(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f, double A);

/// Pointwise r = -Lap u + kbar - (f + lambda) e^{2u}.
ScalarField static_residual_field(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f,
                                  double lambda);
StaticResidual static_residual(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f,
                               double lambda);

FlowDiagnostics diagnostics(const DiscreteSurface& surf, const FlowState& state);

/// Step-size bound from the short-time existence argument, used as dt0:
///   1 / (|kbar| e^{2(|u0|+1)} + |f| (1 + e^{2(|u0|+1)} / A)).
double short_time_bound(const FlowState& state);

/// Semi-implicit stepping with frozen coefficients v:
///   (w - u)/dt = e^{-2v} Lap w + kbar (1/A - e^{-2v}) + f - (1/A) sum a f e^{2v}.
class FlowStepper {
public:
  explicit FlowStepper(const DiscreteSurface& surf);

  StepOutcome step(const FlowState& state, double dt, int picard_iters = 1, bool project_volume = true);

  FlowResult run(const FlowState& initial, const FlowConfig& config);

private:
  const DiscreteSurface& surf_;
  LinearStepSolver solver_;
};

StepOutcome step(const DiscreteSurface& surf, const FlowState& state, double dt, int picard_iters = 1,
                 bool project_volume = true);

FlowResult run(const DiscreteSurface& surf, const FlowState& initial, const FlowConfig& config);

namespace testing {
// Mutation hook for the self-test: flips the sign of the normalization term
// inside the step's source. Never enable outside tests.
void set_alpha_sign_fault(bool enabled);
bool alpha_sign_fault();
} // namespace testing

} // namespace curvflow
