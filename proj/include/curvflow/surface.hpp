#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace curvflow {

// Per-vertex samples: conformal factors, prescriptions, curvatures, sources.
using ScalarField = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum class SurfaceKind { PeriodicGrid, TwoVertex, TriangleMesh };

/// A closed surface reduced to what the conformal calculus needs: lumped
/// vertex areas (summing to one) and the weak-form Laplacian S, with
/// (S u)_i ~ -a_i (Lap u)_i. The background curvature kbar is a configured
/// constant and is not derived from the geometry.
struct DiscreteSurface {
  SurfaceKind kind = SurfaceKind::PeriodicGrid;
  Eigen::VectorXd areas;
  SparseMatrix stiffness;
  double kbar = -1.0;

  // Vertex positions used to evaluate analytic fields: (x, y, 0) on grids,
  // embedded coordinates on meshes, zeros on the two-vertex model.
  Eigen::MatrixX3d positions;

  // False when some off-diagonal stiffness entry is positive (negative
  // cotangent weight). Disables maximum-principle assertions downstream.
  bool delaunay = true;

  std::optional<int> euler_characteristic;
  int grid_n = 0;

  int n() const { return static_cast<int>(areas.size()); }
};

void require_size(const DiscreteSurface& surf, const ScalarField& w, const char* what);

/// Discrete integral sum_i a_i w_i, compensated summation.
double integrate(const DiscreteSurface& surf, const ScalarField& w);

/// sum_i a_i exp(2 u_i), the volume of the metric exp(2u) gbar.
double conformal_volume(const DiscreteSurface& surf, const ScalarField& u);

/// (Lap u)_i = -(S u)_i / a_i.
ScalarField laplacian(const DiscreteSurface& surf, const ScalarField& u);

/// u^T S u.
double dirichlet_energy(const DiscreteSurface& surf, const ScalarField& u);

/// K_i = exp(-2u_i) (-(Lap u)_i + kbar).
ScalarField gauss_curvature(const DiscreteSurface& surf, const ScalarField& u);

/// |sum_i a_i exp(2u_i) K_i - kbar|; zero up to rounding by construction.
double gauss_bonnet_residual(const DiscreteSurface& surf, const ScalarField& u);

/// exp(2u) with overflow detection.
ScalarField exp2u(const ScalarField& u);

// Builders ---------------------------------------------------------------

/// N x N vertices on the unit periodic square with the 5-point stencil.
DiscreteSurface build_periodic_grid(int N, double kbar);

/// Two vertices of area 1/2 joined by one edge of weight w.
DiscreteSurface build_two_vertex(double weight, double kbar);

struct MeshLoadOptions {
  double kbar = -1.0;
  bool allow_nonnegative_euler = false;
};

struct LoadedMesh {
  DiscreteSurface surface;
  int euler_characteristic = 0;
  int vertices = 0;
  int edges = 0;
  int faces = 0;
  std::vector<std::string> warnings;
};

/// Cotangent stiffness and barycentric areas (normalized to total one) for
/// a closed oriented triangle mesh.
LoadedMesh surface_from_triangles(const Eigen::MatrixX3d& positions,
                                  const std::vector<std::array<int, 3>>& faces,
                                  const MeshLoadOptions& options);

/// Reads OFF or OBJ (by extension, falling back to content sniffing).
LoadedMesh load_mesh(const std::string& path, const MeshLoadOptions& options);

} // namespace curvflow
