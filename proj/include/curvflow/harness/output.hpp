#pragma once

#include "curvflow/flow.hpp"
#include "curvflow/statics.hpp"
#include "curvflow/surface.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace curvflow::harness {

inline constexpr const char* kTraceHeader = "t,dt,E,F,alpha,volume,umin,umax,gb_residual";
inline constexpr const char* kBranchHeader = "lambda,V,stab_eig,newton_iters,res_inf";

/// %.17g round-trips every finite double.
std::string format_double(double x);

std::string trace_csv(const std::vector<TraceRow>& trace);
std::string branch_csv(const BranchResult& branch);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& data);

/// Writes bytes verbatim (binary mode, so LF stays LF).
void write_file(const std::filesystem::path& path, const std::string& content);

struct AssertionOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Surface as JSON: {n, kbar, areas, stiffness: [[i, j, value], ...]}.
std::string surface_json(const DiscreteSurface& surf);

} // namespace curvflow::harness
