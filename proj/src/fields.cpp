#include "curvflow/fields.hpp"
#include "curvflow/errors.hpp"

#include <cmath>
#include <numbers>

namespace curvflow {

double field_distance(const DiscreteSurface& surf, int vertex, const Eigen::Vector3d& center) {
  Eigen::Vector3d d = surf.positions.row(vertex).transpose() - center;
  if (surf.kind == SurfaceKind::PeriodicGrid) {
    for (int k = 0; k < 2; ++k) d[k] -= std::round(d[k]);
    d[2] = 0.0;
  }
  return d.norm();
}

ScalarField bump_profile(const DiscreteSurface& surf, const Eigen::Vector3d& center, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("bump radius must be positive");
  ScalarField b(surf.n());
  for (int i = 0; i < surf.n(); ++i) {
    double r = field_distance(surf, i, center);
    if (r >= radius) {
      b[i] = 0.0;
    } else {
      double c = std::cos(0.5 * std::numbers::pi * r / radius);
      b[i] = c * c;
    }
  }
  return b;
}

namespace {

struct Evaluator {
  const DiscreteSurface& surf;

  ScalarField operator()(const ConstantField& s) const { return ScalarField::Constant(surf.n(), s.value); }

  ScalarField operator()(const CosBumpField& s) const {
    return (ScalarField::Constant(surf.n(), s.base) + s.amplitude * bump_profile(surf, s.center, s.radius));
  }

  ScalarField operator()(const NegConstantPlusBumpField& s) const {
    return (ScalarField::Constant(surf.n(), -s.c) + s.height * bump_profile(surf, s.center, s.radius));
  }

  ScalarField operator()(const CappedMaxZeroField& s) const {
    ScalarField f(surf.n());
    const double tau = 2.0 * std::numbers::pi;
    for (int i = 0; i < surf.n(); ++i) {
      double x = surf.positions(i, 0), y = surf.positions(i, 1);
      double g = s.base + s.amplitude * std::cos(tau * s.kx * x) * std::cos(tau * s.ky * y);
      f[i] = std::min(0.0, g) - s.offset;
    }
    return f;
  }

  ScalarField operator()(const SampledField& s) const {
    require_size(surf, s.values, "sampled field");
    return s.values;
  }
};

} // namespace

ScalarField evaluate(const FieldSpec& spec, const DiscreteSurface& surf) {
  return std::visit(Evaluator{surf}, spec);
}

std::string field_name(const FieldSpec& spec) {
  switch (spec.index()) {
  case 0: return "constant";
  case 1: return "cos-bump";
  case 2: return "neg-constant-plus-bump";
  case 3: return "capped-max-zero";
  default: return "samples";
  }
}

} // namespace curvflow
