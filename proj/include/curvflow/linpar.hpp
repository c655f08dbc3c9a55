#pragma once

#include "curvflow/surface.hpp"

#include <Eigen/SparseCholesky>

#include <string>
#include <vector>

namespace curvflow {

/// One backward-Euler step of  du/dt = a Lap u + c u + d  with lumped
/// quadrature. Diffusion and zeroth order terms are implicit, the source is
/// explicit.
struct LinearStepProblem {
  ScalarField a;  // diffusivity, min > 0
  ScalarField c;  // zeroth-order coefficient
  ScalarField d;  // source
  double dt = 0.0;

  void validate(const DiscreteSurface& surf) const;
};

struct LinearStepSolution {
  ScalarField w;
  double residual = 0.0;      // inf-norm residual of the assembled system
  double min_pivot = 0.0;     // smallest LDL^T pivot
  double regularity = 0.0;    // |w|_inf + |Lap w|_inf, logged only
};

/// Step matrix  diag(m)/dt + S - diag(m c),  m_i = area_i / a_i.
SparseMatrix assemble_step_matrix(const DiscreteSurface& surf, const LinearStepProblem& prob);

/// Caches the symbolic factorization so repeated steps on one surface only
/// refactor numerically. Not thread-safe; use one instance per thread.
class LinearStepSolver {
public:
  explicit LinearStepSolver(const DiscreteSurface& surf);

  LinearStepSolution solve(const LinearStepProblem& prob, const ScalarField& u);

  static constexpr double kResidualTolerance = 1e-10;

private:
  const DiscreteSurface& surf_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  bool analyzed_ = false;
};

/// Free-function form of LinearStepSolver::solve.
ScalarField step_implicit(const DiscreteSurface& surf, const LinearStepProblem& prob, const ScalarField& u);

struct MaxPrincipleReport {
  // On non-Delaunay surfaces applicable is false but the bound is still
  // evaluated, so `passed` and the witnesses record what was observed.
  bool applicable = true;
  bool passed = true;
  std::string notice;
  // Bound  max w <= max(0, max u) + dt * max d  (+ tol).
  double bound = 0.0;
  double observed_max = 0.0;
  int witness = -1;
  // Sign variant: u <= 0 and d <= 0 imply w <= tol.
  bool sign_variant_applicable = false;
  bool sign_variant_passed = true;
  int sign_witness = -1;
};

MaxPrincipleReport check_max_principle(const DiscreteSurface& surf, const LinearStepProblem& prob,
                                       const ScalarField& u_before, const ScalarField& u_after,
                                       double tol = 1e-12);

} // namespace curvflow
