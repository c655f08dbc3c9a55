#pragma once

#include <stdexcept>
#include <string>

namespace curvflow {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Field lengths or matrix shapes disagree with the surface.
class DimensionError : public Error {
public:
  using Error::Error;
};

// Inputs outside the admissible set (bad N, kbar >= 0, nonpositive A, ...).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

// exp(2u) overflowed or a result is not finite.
class NumericRangeError : public Error {
public:
  using Error::Error;
};

class MeshError : public Error {
public:
  using Error::Error;
};

class SolverError : public Error {
public:
  using Error::Error;
};

// The step matrix of an implicit solve is not positive definite.
class NotPositiveDefinite : public SolverError {
public:
  NotPositiveDefinite(const std::string& what, double smallestPivot)
      : SolverError(what), smallest_pivot(smallestPivot) {}
  double smallest_pivot;
};

} // namespace curvflow
