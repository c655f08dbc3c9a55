#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace curvflow::harness {

struct SelftestOptions {
  bool inject_alpha_sign = false;           // flips the normalization sign inside the step
  bool inject_negative_weight_mesh = false; // runs the maximum-principle battery on a non-Delaunay mesh
};

enum class CheckStatus { Pass, Fail, Skip };

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Fail;
  std::string detail;
  double seconds = 0.0;
};

std::vector<CheckResult> run_selftest(const SelftestOptions& opts);
std::string format_table(const std::vector<CheckResult>& results);

/// Prints the table; exit 1 if any check failed, 0 otherwise (skips do not fail).
int cli_selftest(const SelftestOptions& opts, bool quiet, std::ostream& out);

const char* to_string(CheckStatus s);

} // namespace curvflow::harness
