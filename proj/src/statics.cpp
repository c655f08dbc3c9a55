#include "curvflow/statics.hpp"
#include "curvflow/errors.hpp"
#include "curvflow/fields.hpp"
#include "curvflow/flow.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace curvflow {

namespace {

// Weak-form residual S u + a (kbar - g e^{2u}) for a prescription g.
Eigen::VectorXd weak_residual(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& g) {
  Eigen::VectorXd r = surf.stiffness * u;
  ScalarField e = exp2u(u);
  for (int i = 0; i < surf.n(); ++i) r[i] += surf.areas[i] * (surf.kbar - g[i] * e[i]);
  return r;
}

double pointwise_inf(const DiscreteSurface& surf, const Eigen::VectorXd& weak) {
  return weak.cwiseQuotient(surf.areas).lpNorm<Eigen::Infinity>();
}

// S + diag(a q) with q = -2 g e^{2u}: the Jacobian of the weak residual and
// the stability operator.
SparseMatrix linearization(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& g) {
  SparseMatrix j = surf.stiffness;
  ScalarField e = exp2u(u);
  for (int i = 0; i < surf.n(); ++i) j.coeffRef(i, i) += -2.0 * surf.areas[i] * g[i] * e[i];
  j.makeCompressed();
  return j;
}

} // namespace

NewtonReport solve_f_nonpositive(const DiscreteSurface& surf, const ScalarField& f,
                                 const std::optional<ScalarField>& initial, const NewtonOptions& options) {
  require_size(surf, f, "solve_f_nonpositive");
  if (f.maxCoeff() > 0.0) throw InvalidArgument("solve_f_nonpositive: f must be nonpositive");
  if (f.minCoeff() == 0.0 && f.maxCoeff() == 0.0)
    throw InvalidArgument("solve_f_nonpositive: f must not vanish identically");

  NewtonReport rep;
  rep.u = initial ? *initial : ScalarField::Zero(surf.n());
  require_size(surf, rep.u, "solve_f_nonpositive initial guess");

  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  bool analyzed = false;
  Eigen::VectorXd r = weak_residual(surf, rep.u, f);
  rep.residual = pointwise_inf(surf, r);
  double phi = energy(surf, rep.u, f);

  while (rep.residual > options.tol && rep.iterations < options.max_iters) {
    SparseMatrix jac = linearization(surf, rep.u, f);
    if (!analyzed) {
      ldlt.analyzePattern(jac);
      analyzed = true;
    }
    ldlt.factorize(jac);
    if (ldlt.info() != Eigen::Success) throw SolverError("solve_f_nonpositive: Jacobian factorization failed");
    Eigen::VectorXd delta = -ldlt.solve(r);
    double slope = r.dot(delta);

    // Backtracking on the convex energy; near the solution energy differences
    // drown in rounding, so a decrease of the residual also accepts.
    double s = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      ScalarField trial = rep.u + s * delta;
      try {
        double phiTrial = energy(surf, trial, f);
        Eigen::VectorXd rTrial = weak_residual(surf, trial, f);
        double resTrial = pointwise_inf(surf, rTrial);
        if (phiTrial <= phi + 1e-4 * s * slope || resTrial < rep.residual) {
          rep.u = std::move(trial);
          r = std::move(rTrial);
          rep.residual = resTrial;
          phi = phiTrial;
          accepted = true;
          break;
        }
      } catch (const NumericRangeError&) {
      }
      s *= 0.5;
    }
    ++rep.iterations;
    if (!accepted) break;
  }
  rep.converged = rep.residual <= options.tol;
  return rep;
}

ConstrainedSolution newton_polish_constrained(const DiscreteSurface& surf, const ScalarField& f,
                                              const ScalarField& u0, double A, double tol, int max_iters) {
  require_size(surf, f, "newton_polish_constrained f");
  require_size(surf, u0, "newton_polish_constrained u0");
  if (!(A > 0.0)) throw InvalidArgument("newton_polish_constrained: A must be positive");
  const int n = surf.n();

  ConstrainedSolution sol;
  sol.u = u0;
  sol.lambda = compute_lambda(surf, u0, f, A);

  auto evaluate = [&](const ScalarField& u, double lambda, Eigen::VectorXd& g, double& h) {
    g = weak_residual(surf, u, (f.array() + lambda).matrix());
    h = conformal_volume(surf, u) - A;
  };
  auto merit = [&](const Eigen::VectorXd& g, double h) {
    return std::max(pointwise_inf(surf, g), std::abs(h) / A);
  };

  Eigen::VectorXd g;
  double h = 0.0;
  evaluate(sol.u, sol.lambda, g, h);
  double m = merit(g, h);

  Eigen::SparseLU<SparseMatrix> lu;
  bool analyzed = false;
  while (m > tol && sol.iterations < max_iters) {
    ScalarField e = exp2u(sol.u);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(surf.stiffness.nonZeros() + 3 * n));
    for (int k = 0; k < surf.stiffness.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(surf.stiffness, k); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < n; ++i) {
      double ae = surf.areas[i] * e[i];
      trips.emplace_back(i, i, -2.0 * ae * (f[i] + sol.lambda));
      trips.emplace_back(i, n, -ae);
      trips.emplace_back(n, i, 2.0 * ae);
    }
    SparseMatrix jac(n + 1, n + 1);
    jac.setFromTriplets(trips.begin(), trips.end());
    jac.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(jac);
      analyzed = true;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success)
      throw SolverError("newton_polish_constrained: singular bordered Jacobian (degenerate critical point)");
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = -g;
    rhs[n] = -h;
    Eigen::VectorXd delta = lu.solve(rhs);
    if (!delta.allFinite())
      throw SolverError("newton_polish_constrained: singular bordered Jacobian (degenerate critical point)");

    double s = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30; ++k) {
      ScalarField trial = sol.u + s * delta.head(n);
      double lamTrial = sol.lambda + s * delta[n];
      try {
        Eigen::VectorXd gt;
        double ht = 0.0;
        evaluate(trial, lamTrial, gt, ht);
        double mt = merit(gt, ht);
        if (mt < m || (s == 1.0 && mt <= 2.0 * m && m > 1e-6)) {
          sol.u = std::move(trial);
          sol.lambda = lamTrial;
          g = std::move(gt);
          h = ht;
          m = mt;
          accepted = true;
          break;
        }
      } catch (const NumericRangeError&) {
      }
      s *= 0.5;
    }
    ++sol.iterations;
    if (!accepted) break;  // stagnated at rounding level
  }

  sol.residual = static_residual(surf, sol.u, f, sol.lambda).inf;
  sol.volume_error = std::abs(conformal_volume(surf, sol.u) - A) / A;
  sol.converged = m <= tol;
  return sol;
}

StabilityResult stability_eigenpair(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f,
                                    double lambda, double tol) {
  require_size(surf, u, "stability_eigenvalue u");
  require_size(surf, f, "stability_eigenvalue f");
  const int n = surf.n();
  ScalarField flam = (f.array() + lambda).matrix();
  SparseMatrix H = linearization(surf, u, flam);
  ScalarField e = exp2u(u);
  ScalarField q = (-2.0 * flam.cwiseProduct(e));

  StabilityResult res;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  ldlt.analyzePattern(H);

  auto shifted = [&](double sigma) {
    SparseMatrix m = H;
    for (int i = 0; i < n; ++i) m.coeffRef(i, i) -= sigma * surf.areas[i];
    return m;
  };
  // Sylvester inertia: the number of negative pivots of H - sigma B equals
  // the number of eigenvalues below sigma.
  auto count_below = [&](double sigma) {
    ldlt.factorize(shifted(sigma));
    ++res.factorizations;
    if (ldlt.info() != Eigen::Success) return -1;
    int neg = 0;
    for (int i = 0; i < n; ++i) {
      double p = ldlt.vectorD()[i];
      if (!(p > 0.0)) ++neg;
    }
    return neg;
  };

  // nu_min >= min q since S is PSD; nu_min <= Rayleigh quotient of 1.
  double lo = q.minCoeff() - 1.0;
  double hi = integrate(surf, q);
  double width = 1e-4 * (1.0 + std::abs(hi));
  while (hi - lo > width) {
    double mid = 0.5 * (lo + hi);
    int below = count_below(mid);
    if (below != 0)
      hi = mid;
    else
      lo = mid;
  }

  double sigma = lo - 1e-8 * (1.0 + std::abs(lo));
  if (count_below(sigma) != 0) throw SolverError("stability_eigenvalue: shift factorization failed");

  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = 1.0 + unif(rng);

  auto bnorm = [&](const Eigen::VectorXd& v) { return std::sqrt(v.dot(surf.areas.cwiseProduct(v))); };
  x /= bnorm(x);
  double rho = x.dot(H * x);
  for (res.iterations = 1; res.iterations <= 1000; ++res.iterations) {
    Eigen::VectorXd y = ldlt.solve(surf.areas.cwiseProduct(x));
    x = y / bnorm(y);
    double next = x.dot(H * x);
    double change = std::abs(next - rho);
    rho = next;
    if (res.iterations > 2 && change <= tol * std::max(1.0, std::abs(rho))) {
      Eigen::VectorXd resid = H * x - rho * surf.areas.cwiseProduct(x);
      double rnorm = std::sqrt(resid.dot(resid.cwiseQuotient(surf.areas)));
      if (rnorm <= std::sqrt(tol) * std::max(1.0, std::abs(rho))) {
        res.value = rho;
        res.eigenvector = x;
        return res;
      }
    }
  }
  throw SolverError("stability_eigenvalue: inverse iteration did not converge");
}

double stability_eigenvalue(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f,
                            double lambda, double tol) {
  return stability_eigenpair(surf, u, f, lambda, tol).value;
}

namespace {

struct CorrectorResult {
  ScalarField u;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

CorrectorResult fixed_lambda_newton(const DiscreteSurface& surf, const ScalarField& g, ScalarField u,
                                    const NewtonOptions& options) {
  CorrectorResult out;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  try {
    Eigen::VectorXd r = weak_residual(surf, u, g);
    out.residual = pointwise_inf(surf, r);
    while (out.residual > options.tol && out.iterations < options.max_iters) {
      SparseMatrix jac = linearization(surf, u, g);
      ldlt.compute(jac);
      if (ldlt.info() != Eigen::Success) break;
      Eigen::VectorXd delta = -ldlt.solve(r);
      if (!delta.allFinite()) break;
      double s = 1.0;
      bool accepted = false;
      for (int k = 0; k < 20; ++k) {
        ScalarField trial = u + s * delta;
        try {
          Eigen::VectorXd rt = weak_residual(surf, trial, g);
          double res = pointwise_inf(surf, rt);
          if (res < out.residual) {
            u = std::move(trial);
            r = std::move(rt);
            out.residual = res;
            accepted = true;
            break;
          }
        } catch (const NumericRangeError&) {
        }
        s *= 0.5;
      }
      ++out.iterations;
      if (!accepted) break;
    }
  } catch (const NumericRangeError&) {
    out.residual = INFINITY;
  }
  out.u = std::move(u);
  out.converged = out.residual <= options.tol;
  return out;
}

} // namespace

BranchResult continue_branch(const DiscreteSurface& surf, const ScalarField& f,
                             const std::vector<double>& lambda_grid, const NewtonOptions& options) {
  require_size(surf, f, "continue_branch");
  if (lambda_grid.empty()) throw InvalidArgument("continue_branch: empty lambda grid");
  if (f.maxCoeff() - f.minCoeff() <= 0.0) throw InvalidArgument("continue_branch: f must be nonconstant");
  if (std::abs(f.maxCoeff()) > 1e-12) throw InvalidArgument("continue_branch: max f must be 0");
  if (lambda_grid.front() > 0.0) throw InvalidArgument("continue_branch: lambda grid must start at or below 0");
  for (size_t k = 1; k < lambda_grid.size(); ++k)
    if (!(lambda_grid[k] > lambda_grid[k - 1]))
      throw InvalidArgument("continue_branch: lambda grid must be strictly increasing");

  BranchResult out;
  const double lam0 = lambda_grid.front();
  ScalarField g0 = (f.array() + lam0).matrix();
  NewtonReport seed = solve_f_nonpositive(surf, g0, std::nullopt, options);
  if (!seed.converged) {
    out.truncated = true;
    out.stop_lambda = lam0;
    out.stop_reason = "seed solve did not converge";
    return out;
  }

  auto make_point = [&](double lam, ScalarField u, int iters) {
    BranchPoint p;
    p.lambda = lam;
    p.residual = static_residual(surf, u, f, lam).inf;
    p.volume = conformal_volume(surf, u);
    p.stab_eig = stability_eigenvalue(surf, u, f, lam);
    p.newton_iters = iters;
    p.u = std::move(u);
    return p;
  };

  out.points.push_back(make_point(lam0, seed.u, seed.iterations));
  out.last_stable_lambda = lam0;

  for (size_t k = 1; k < lambda_grid.size(); ++k) {
    const BranchPoint& prev = out.points.back();
    const double lam = lambda_grid[k];
    ScalarField g = (f.array() + lam).matrix();

    // Tangent predictor: J du/dlambda = a e^{2u}.
    ScalarField guess = prev.u;
    {
      SparseMatrix jac = linearization(surf, prev.u, (f.array() + prev.lambda).matrix());
      Eigen::SimplicialLDLT<SparseMatrix> ldlt(jac);
      if (ldlt.info() == Eigen::Success) {
        Eigen::VectorXd tangent = ldlt.solve(surf.areas.cwiseProduct(exp2u(prev.u)));
        if (tangent.allFinite()) guess = prev.u + (lam - prev.lambda) * tangent;
      }
    }

    CorrectorResult corr = fixed_lambda_newton(surf, g, guess, options);
    if (!corr.converged) {
      out.truncated = true;
      out.stop_lambda = lam;
      std::ostringstream msg;
      msg << "Newton failed at lambda = " << lam << " (residual " << corr.residual << ")";
      out.stop_reason = msg.str();
      break;
    }
    BranchPoint p = make_point(lam, std::move(corr.u), corr.iterations);
    if (p.stab_eig < 0.0) {
      out.truncated = true;
      out.stop_lambda = lam;
      std::ostringstream msg;
      msg << "stability eigenvalue " << p.stab_eig << " < 0 at lambda = " << lam;
      out.stop_reason = msg.str();
      break;
    }
    out.last_stable_lambda = lam;
    out.points.push_back(std::move(p));
  }
  if (!out.truncated) out.stop_reason = "grid exhausted";
  return out;
}

double m_upper_bound(const DiscreteSurface& surf, const ScalarField& f, double A) {
  if (!(A > 0.0)) throw InvalidArgument("m_upper_bound: A must be positive");
  return 0.5 * (surf.kbar * std::log(A) - A * integrate(surf, f));
}

LambdaEpsilonReport lambda_epsilon_check(const DiscreteSurface& surf, const ScalarField& u, const ScalarField& f,
                                         double lambda, double A, double eps) {
  LambdaEpsilonReport rep;
  rep.energy = energy(surf, u, f);
  rep.energy_threshold = 0.5 * eps * A;
  rep.kbar_term = std::abs(surf.kbar) * std::log(A) / (2.0 * A);
  rep.lambda = lambda;
  rep.epsilon = eps;
  bool premises = rep.energy < rep.energy_threshold && rep.kbar_term < 0.5 * eps;
  if (!premises)
    rep.verdict = Verdict::NotApplicable;
  else
    rep.verdict = lambda < eps ? Verdict::Holds : Verdict::Violated;
  return rep;
}

BumpDatum low_energy_bump(const DiscreteSurface& surf, const Eigen::Vector3d& center, double radius, double A) {
  if (!(A >= 1.0)) throw InvalidArgument("low_energy_bump: A must be at least 1");
  BumpDatum b;
  b.psi = 2.0 * bump_profile(surf, center, radius);
  if (!(b.psi.maxCoeff() > 0.0)) throw InvalidArgument("low_energy_bump: bump contains no vertex");

  auto h = [&](double tau) { return conformal_volume(surf, tau * b.psi); };
  double lo = 0.0, hi = 1.0;
  while (h(hi) < A) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e3) throw NumericRangeError("low_energy_bump: volume target out of reach");
  }
  for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
    double mid = 0.5 * (lo + hi);
    if (h(mid) < A)
      lo = mid;
    else
      hi = mid;
  }
  b.tau = 0.5 * (lo + hi);
  b.u0 = project_to_volume(surf, b.tau * b.psi, A);
  return b;
}

const char* to_string(Verdict v) {
  switch (v) {
  case Verdict::Holds: return "holds";
  case Verdict::Violated: return "violated";
  default: return "not applicable";
  }
}

} // namespace curvflow
