#include "curvflow/linpar.hpp"
#include "curvflow/errors.hpp"

#include <cmath>
#include <sstream>

namespace curvflow {

void LinearStepProblem::validate(const DiscreteSurface& surf) const {
  require_size(surf, a, "linear step diffusivity");
  require_size(surf, c, "linear step coefficient c");
  require_size(surf, d, "linear step source");
  if (!(dt > 0.0)) throw InvalidArgument("linear step: dt must be positive");
  if (!(a.minCoeff() > 0.0)) throw InvalidArgument("linear step: diffusivity must be positive");
  if (!a.allFinite() || !c.allFinite() || !d.allFinite())
    throw NumericRangeError("linear step: non-finite coefficients");
}

SparseMatrix assemble_step_matrix(const DiscreteSurface& surf, const LinearStepProblem& prob) {
  prob.validate(surf);
  SparseMatrix m = surf.stiffness;
  for (int i = 0; i < surf.n(); ++i) {
    double mass = surf.areas[i] / prob.a[i];
    m.coeffRef(i, i) += mass / prob.dt - mass * prob.c[i];
  }
  m.makeCompressed();
  return m;
}

LinearStepSolver::LinearStepSolver(const DiscreteSurface& surf) : surf_(surf) {}

LinearStepSolution LinearStepSolver::solve(const LinearStepProblem& prob, const ScalarField& u) {
  require_size(surf_, u, "linear step initial value");
  SparseMatrix m = assemble_step_matrix(surf_, prob);

  Eigen::VectorXd mass = surf_.areas.cwiseQuotient(prob.a);
  Eigen::VectorXd rhs = mass.cwiseProduct(u / prob.dt + prob.d);

  if (!analyzed_) {
    ldlt_.analyzePattern(m);
    analyzed_ = true;
  }
  ldlt_.factorize(m);
  LinearStepSolution out;
  out.min_pivot = ldlt_.info() == Eigen::Success ? ldlt_.vectorD().minCoeff() : -INFINITY;
  if (ldlt_.info() != Eigen::Success || !(out.min_pivot > 0.0)) {
    std::ostringstream msg;
    msg << "implicit step matrix is not positive definite (smallest pivot " << out.min_pivot << ")";
    throw NotPositiveDefinite(msg.str(), out.min_pivot);
  }

  out.w = ldlt_.solve(rhs);
  Eigen::VectorXd r = rhs - m * out.w;
  out.residual = r.lpNorm<Eigen::Infinity>();
  double tol = kResidualTolerance * (out.w.lpNorm<Eigen::Infinity>() + 1.0);
  if (!(out.residual <= tol)) {
    out.w += ldlt_.solve(r);
    out.residual = (rhs - m * out.w).lpNorm<Eigen::Infinity>();
  }
  if (!(out.residual <= tol) || !out.w.allFinite()) {
    std::ostringstream msg;
    msg << "implicit step solve did not reach residual tolerance (" << out.residual << " > " << tol << ")";
    throw SolverError(msg.str());
  }
  out.regularity = out.w.lpNorm<Eigen::Infinity>() + laplacian(surf_, out.w).lpNorm<Eigen::Infinity>();
  return out;
}

ScalarField step_implicit(const DiscreteSurface& surf, const LinearStepProblem& prob, const ScalarField& u) {
  LinearStepSolver solver(surf);
  return solver.solve(prob, u).w;
}

MaxPrincipleReport check_max_principle(const DiscreteSurface& surf, const LinearStepProblem& prob,
                                       const ScalarField& u_before, const ScalarField& u_after,
                                       double tol) {
  MaxPrincipleReport rep;
  if (u_before.size() != surf.n() || u_after.size() != surf.n() || prob.d.size() != surf.n() ||
      prob.c.size() != surf.n()) {
    rep.applicable = false;
    rep.notice = "dimension mismatch";
    return rep;
  }
  if (prob.c.cwiseAbs().maxCoeff() != 0.0) {
    rep.applicable = false;
    rep.notice = "c is not identically zero";
    return rep;
  }
  // Without an M-matrix the bound can genuinely fail: still measured, not asserted.
  if (!surf.delaunay) {
    rep.applicable = false;
    rep.notice = "delaunay: false (negative cotangent weights); maximum principle not asserted";
  }

  double dmax = prob.d.maxCoeff();
  rep.bound = std::max(0.0, u_before.maxCoeff()) + prob.dt * dmax;
  rep.observed_max = u_after.maxCoeff(&rep.witness);
  rep.passed = rep.observed_max <= rep.bound + tol;
  if (rep.passed) rep.witness = -1;

  rep.sign_variant_applicable = u_before.maxCoeff() <= 0.0 && dmax <= 0.0;
  if (rep.sign_variant_applicable) {
    int idx = -1;
    double m = u_after.maxCoeff(&idx);
    rep.sign_variant_passed = m <= tol;
    rep.sign_witness = rep.sign_variant_passed ? -1 : idx;
  }
  rep.passed = rep.passed && rep.sign_variant_passed;
  return rep;
}

} // namespace curvflow
