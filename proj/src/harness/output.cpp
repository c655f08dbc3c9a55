#include "curvflow/harness/output.hpp"
#include "curvflow/errors.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace curvflow::harness {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const TraceRow& r : trace) {
    for (double v : {r.t, r.dt, r.E, r.F, r.alpha, r.volume, r.umin, r.umax}) {
      out += format_double(v);
      out += ',';
    }
    out += format_double(r.gb_residual);
    out += '\n';
  }
  return out;
}

std::string branch_csv(const BranchResult& branch) {
  std::string out = kBranchHeader;
  out += '\n';
  for (const BranchPoint& p : branch.points) {
    out += format_double(p.lambda) + ',' + format_double(p.volume) + ',' + format_double(p.stab_eig) + ',' +
           std::to_string(p.newton_iters) + ',' + format_double(p.residual) + '\n';
  }
  return out;
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

std::string surface_json(const DiscreteSurface& surf) {
  nlohmann::json j;
  j["n"] = surf.n();
  j["kbar"] = surf.kbar;
  j["areas"] = std::vector<double>(surf.areas.data(), surf.areas.data() + surf.areas.size());
  nlohmann::json trips = nlohmann::json::array();
  for (int k = 0; k < surf.stiffness.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(surf.stiffness, k); it; ++it)
      trips.push_back({it.row(), it.col(), it.value()});
  j["stiffness"] = std::move(trips);
  return j.dump() + "\n";
}

} // namespace curvflow::harness
