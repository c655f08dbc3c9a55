#pragma once

#include "curvflow/harness/config.hpp"
#include "curvflow/harness/output.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace curvflow::harness {

enum ExitCode : int { kExitPass = 0, kExitAssertion = 1, kExitConfig = 2 };

struct CliOptions {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

struct RunReport {
  FlowResult flow;
  ScalarField f;
  double volume = 0.0;
  std::optional<double> stab_eig;
  std::vector<AssertionOutcome> assertions;
  std::vector<std::string> warnings;
  bool passed = false;
};

struct BranchReport {
  BranchResult branch;
  std::vector<AssertionOutcome> assertions;
  std::vector<std::string> warnings;
  bool passed = false;
};

/// Runs the flow for the configured instance and evaluates its assertions.
/// Throws ConfigError for inputs that cannot be built.
RunReport run_scenario(const ExperimentConfig& cfg);
BranchReport run_branch(const ExperimentConfig& cfg);

std::string result_json(const ExperimentConfig& cfg, const RunReport& report);
std::string branch_json(const ExperimentConfig& cfg, const BranchReport& report);

/// Full CLI commands: parse, run, write outputs under the output directory.
int cli_run(const std::filesystem::path& config, const CliOptions& opts, std::ostream& out, std::ostream& err);
int cli_branch(const std::filesystem::path& config, const CliOptions& opts, std::ostream& out, std::ostream& err);

} // namespace curvflow::harness
