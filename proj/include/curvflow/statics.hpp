#pragma once

#include "curvflow/surface.hpp"

#include <optional>
#include <string>
#include <vector>

namespace curvflow {

struct NewtonOptions {
  double tol = 1e-10;
  int max_iters = 100;
};

struct NewtonReport {
  ScalarField u;
  int iterations = 0;
  double residual = 0.0;  // inf-norm of -Lap u + kbar - f e^{2u}
  bool converged = false;
};

/// Unique solution of -Lap u + kbar = f e^{2u} for f <= 0, f not identically
/// zero. Damped Newton on the strictly convex energy; the weak-form Jacobian
/// S + diag(-2 a f e^{2u}) is SPD.
NewtonReport solve_f_nonpositive(const DiscreteSurface& surf, const ScalarField& f,
                                 const std::optional<ScalarField>& initial = {},
                                 const NewtonOptions& options = {});

struct ConstrainedSolution {
  ScalarField u;
  double lambda = 0.0;
  int iterations = 0;
  double residual = 0.0;       // inf-norm static residual
  double volume_error = 0.0;   // |vol(u) - A| / A
  bool converged = false;
};

/// Newton on the bordered system {-Lap u + kbar = (f + lambda) e^{2u},
/// vol(u) = A} in (u, lambda). Throws SolverError if the bordered Jacobian is
/// singular.
ConstrainedSolution newton_polish_constrained(const DiscreteSurface& surf, const ScalarField& f,
                                              const ScalarField& u0, double A, double tol = 1e-12,
                                              int max_iters = 50);

struct StabilityResult {
  double value = 0.0;
  ScalarField eigenvector;
  int factorizations = 0;
  int iterations = 0;
};

/// Smallest eigenvalue of (S - 2 diag(a (f+lambda) e^{2u})) h = nu diag(a) h.
/// nu >= 0 iff the solution is (discretely) weakly stable.
StabilityResult stability_eigenpair(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f,
                                    double lambda, double tol = 1e-10);
double stability_eigenvalue(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f,
                            double lambda, double tol = 1e-10);

struct BranchPoint {
  double lambda = 0.0;
  ScalarField u;
  double volume = 0.0;
  double stab_eig = 0.0;
  int newton_iters = 0;
  double residual = 0.0;
};

struct BranchResult {
  std::vector<BranchPoint> points;
  bool truncated = false;
  // Last grid value with a stable converged solution, and the first value
  // where continuation stopped. Together they bracket the empirical end of
  // the stable branch; neither is the exact end point.
  std::optional<double> last_stable_lambda;
  std::optional<double> stop_lambda;
  std::string stop_reason;
};

/// Natural continuation with a tangent predictor along the stable branch
/// lambda -> u_lambda of -Lap u + kbar = (f + lambda) e^{2u}, for nonconstant
/// f with max f = 0.
BranchResult continue_branch(const DiscreteSurface& surf, const ScalarField& f,
                             const std::vector<double>& lambda_grid, const NewtonOptions& options = {});

/// Energy of the constant member of the constraint set:
/// (1/2)(kbar log A - A int f), an upper bound for the constrained infimum.
double m_upper_bound(const DiscreteSurface& surf, const ScalarField& f, double A);

enum class Verdict { NotApplicable, Holds, Violated };

struct LambdaEpsilonReport {
  double energy = 0.0;
  double energy_threshold = 0.0;   // eps A / 2
  double kbar_term = 0.0;          // |kbar| log(A) / (2A)
  double lambda = 0.0;
  double epsilon = 0.0;
  Verdict verdict = Verdict::NotApplicable;
};

/// If E_f(u) < eps A / 2 and |kbar| log(A)/(2A) < eps/2, then lambda < eps.
LambdaEpsilonReport lambda_epsilon_check(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f,
                                         double lambda, double A, double eps);

struct BumpDatum {
  ScalarField psi;  // nonnegative, max 2, supported in the bump disk
  double tau = 0.0;
  ScalarField u0;   // tau * psi, volume A
};

/// tau * psi with sum a e^{2 tau psi} = A (A >= 1), tau found by bisection.
BumpDatum low_energy_bump(const DiscreteSurface& surf, const Eigen::Vector3d& center, double radius, double A);

const char* to_string(Verdict v);

} // namespace curvflow
