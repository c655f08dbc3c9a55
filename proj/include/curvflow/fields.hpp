#pragma once

#include "curvflow/surface.hpp"

#include <string>
#include <variant>

namespace curvflow {

// Closed vocabulary of analytic prescriptions evaluated at vertex positions.
// Distances are periodic on grids and Euclidean otherwise.

struct ConstantField {
  double value = 0.0;
};

/// base + amplitude * b(x), b = cos^2(pi r / 2R) inside radius R, 0 outside.
struct CosBumpField {
  double base = 0.0;
  double amplitude = 1.0;
  Eigen::Vector3d center = Eigen::Vector3d(0.5, 0.5, 0.0);
  double radius = 0.25;
};

/// -c + height * b(x); with height = c the field lies in [-c, 0] and
/// touches zero at the bump center.
struct NegConstantPlusBumpField {
  double c = 1.0;
  double height = 1.0;
  Eigen::Vector3d center = Eigen::Vector3d(0.5, 0.5, 0.0);
  double radius = 0.1;
};

/// min(0, base + amplitude cos(2 pi kx x) cos(2 pi ky y)) - offset.
struct CappedMaxZeroField {
  double base = -1.0;
  double amplitude = 0.5;
  int kx = 1;
  int ky = 1;
  double offset = 0.0;
};

struct SampledField {
  ScalarField values;
};

using FieldSpec =
    std::variant<ConstantField, CosBumpField, NegConstantPlusBumpField, CappedMaxZeroField, SampledField>;

ScalarField evaluate(const FieldSpec& spec, const DiscreteSurface& surf);

/// cos^2 bump profile at every vertex: 1 at the center, 0 beyond radius.
ScalarField bump_profile(const DiscreteSurface& surf, const Eigen::Vector3d& center, double radius);

/// Distance used by the analytic fields (periodic on the unit grid square).
double field_distance(const DiscreteSurface& surf, int vertex, const Eigen::Vector3d& center);

std::string field_name(const FieldSpec& spec);

} // namespace curvflow
