#pragma once

#include "curvflow/errors.hpp"
#include "curvflow/fields.hpp"
#include "curvflow/flow.hpp"
#include "curvflow/statics.hpp"
#include "curvflow/surface.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace curvflow::harness {

/// Raised for anything wrong with a configuration document. `line` and
/// `column` are 1-based and set for syntax errors; `path` is a JSON pointer
/// for semantic errors.
class ConfigError : public Error {
public:
  ConfigError(const std::string& message, std::string path = {}, int line = 0, int column = 0);
  std::string path;
  int line;
  int column;
};

enum class SurfaceType { Grid, TwoVertex, Mesh };

struct SurfaceSpec {
  SurfaceType type = SurfaceType::Grid;
  int n = 16;                 // grid
  double weight = 1.0;        // two-vertex
  std::filesystem::path path; // mesh
  bool allow_nonnegative_euler = false;
  double kbar = -1.0;
};

struct U0Spec {
  enum class Kind { Constant, Bump, Random, File } kind = Kind::Constant;
  Eigen::Vector3d center = Eigen::Vector3d(0.5, 0.5, 0.0);
  double radius = 0.2;
  double amplitude = 0.1;
  std::filesystem::path path;
};

struct Assertions {
  bool converged = true;
  bool lambda_positive = false;
  bool stab_eig_negative = false;
  bool flow_bounds = true;  // |alpha| <= alpha0 and mean(u) <= log(A)/2 on the trace
  std::optional<double> lambda_expected;
  double lambda_tol = 1e-9;
  std::optional<double> u_constant_tol;  // |u_inf - log(A)/2|_inf bound
  bool branch_monotone = true;
  bool branch_stable_below_zero = true;
};

struct ExperimentConfig {
  std::string scenario = "generic";
  SurfaceSpec surface;
  FieldSpec f = ConstantField{-1.0};
  std::optional<std::filesystem::path> f_file;
  double A = 1.0;
  U0Spec u0;
  FlowConfig flow;
  std::vector<double> lambda_grid;
  Assertions assertions;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> output_dir;

  // Canonical JSON of the parsed input, used for the manifest hash.
  std::string canonical;
};

/// Scenario names understood by the runner.
const std::vector<std::string>& scenario_names();

/// Parses a configuration document. Relative paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Surface described by the config; mesh warnings are appended to `warnings`.
DiscreteSurface build_surface(const ExperimentConfig& cfg, std::vector<std::string>* warnings = nullptr);
ScalarField build_f(const ExperimentConfig& cfg, const DiscreteSurface& surf);
ScalarField build_u0(const ExperimentConfig& cfg, const DiscreteSurface& surf);

/// Whitespace-separated per-vertex values.
ScalarField read_field_file(const std::filesystem::path& path);

} // namespace curvflow::harness
