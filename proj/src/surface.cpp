#include "curvflow/surface.hpp"
#include "curvflow/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace curvflow {

void require_size(const DiscreteSurface& surf, const ScalarField& w, const char* what) {
  if (w.size() != surf.areas.size()) {
    std::ostringstream msg;
    msg << what << ": field has " << w.size() << " entries, surface has " << surf.areas.size()
        << " vertices";
    throw DimensionError(msg.str());
  }
}

double integrate(const DiscreteSurface& surf, const ScalarField& w) {
  require_size(surf, w, "integrate");
  // Neumaier summation; the Gauss-Bonnet and volume identities are checked
  // close to machine precision.
  double sum = 0.0;
  double comp = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    double term = surf.areas[i] * w[i];
    double t = sum + term;
    if (std::abs(sum) >= std::abs(term))
      comp += (sum - t) + term;
    else
      comp += (term - t) + sum;
    sum = t;
  }
  return sum + comp;
}

ScalarField exp2u(const ScalarField& u) {
  ScalarField out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double e = std::exp(2.0 * u[i]);
    if (!std::isfinite(e)) {
      std::ostringstream msg;
      msg << "exp(2u) out of range at vertex " << i << " (u = " << u[i] << ")";
      throw NumericRangeError(msg.str());
    }
    out[i] = e;
  }
  return out;
}

double conformal_volume(const DiscreteSurface& surf, const ScalarField& u) {
  require_size(surf, u, "conformal_volume");
  return integrate(surf, exp2u(u));
}

ScalarField laplacian(const DiscreteSurface& surf, const ScalarField& u) {
  require_size(surf, u, "laplacian");
  // Edge-difference form: exact zero on constants, and the weighted sum
  // vanishes up to rounding of the pairwise terms.
  ScalarField su = ScalarField::Zero(u.size());
  for (int k = 0; k < surf.stiffness.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(surf.stiffness, k); it; ++it)
      if (it.row() != it.col()) su[it.row()] += it.value() * (u[it.col()] - u[it.row()]);
  return -(su.array() / surf.areas.array()).matrix();
}

double dirichlet_energy(const DiscreteSurface& surf, const ScalarField& u) {
  require_size(surf, u, "dirichlet_energy");
  return u.dot(surf.stiffness * u);
}

ScalarField gauss_curvature(const DiscreteSurface& surf, const ScalarField& u) {
  require_size(surf, u, "gauss_curvature");
  ScalarField lap = laplacian(surf, u);
  ScalarField k(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    k[i] = std::exp(-2.0 * u[i]) * (-lap[i] + surf.kbar);
    if (!std::isfinite(k[i]))
      throw NumericRangeError("gauss_curvature: non-finite curvature at vertex " +
                              std::to_string(i));
  }
  return k;
}

double gauss_bonnet_residual(const DiscreteSurface& surf, const ScalarField& u) {
  ScalarField k = gauss_curvature(surf, u);
  ScalarField weighted = exp2u(u).cwiseProduct(k);
  return std::abs(integrate(surf, weighted) - surf.kbar);
}

DiscreteSurface build_periodic_grid(int N, double kbar) {
  if (N < 2) throw InvalidArgument("build_periodic_grid: N must be at least 2");
  if (!(kbar < 0.0)) throw InvalidArgument("build_periodic_grid: kbar must be negative");

  DiscreteSurface surf;
  surf.kind = SurfaceKind::PeriodicGrid;
  surf.kbar = kbar;
  surf.grid_n = N;
  const int n = N * N;
  const double h = 1.0 / N;
  surf.areas = Eigen::VectorXd::Constant(n, h * h);
  surf.positions.resize(n, 3);

  // a_i / h^2 = 1, so the weak-form stencil has integer entries and every
  // row sums to zero exactly.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(5 * static_cast<size_t>(n));
  auto id = [N](int i, int j) { return ((i + N) % N) + N * ((j + N) % N); };
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      int v = id(i, j);
      surf.positions.row(v) << i * h, j * h, 0.0;
      trips.emplace_back(v, v, 4.0);
      trips.emplace_back(v, id(i + 1, j), -1.0);
      trips.emplace_back(v, id(i - 1, j), -1.0);
      trips.emplace_back(v, id(i, j + 1), -1.0);
      trips.emplace_back(v, id(i, j - 1), -1.0);
    }
  }
  surf.stiffness.resize(n, n);
  surf.stiffness.setFromTriplets(trips.begin(), trips.end());
  surf.stiffness.makeCompressed();
  return surf;
}

DiscreteSurface build_two_vertex(double weight, double kbar) {
  if (!(weight > 0.0)) throw InvalidArgument("build_two_vertex: weight must be positive");
  if (!(kbar < 0.0)) throw InvalidArgument("build_two_vertex: kbar must be negative");
  DiscreteSurface surf;
  surf.kind = SurfaceKind::TwoVertex;
  surf.kbar = kbar;
  surf.areas = Eigen::Vector2d(0.5, 0.5);
  surf.positions = Eigen::MatrixX3d::Zero(2, 3);
  surf.positions(1, 0) = 1.0;
  std::vector<Eigen::Triplet<double>> trips{
      {0, 0, weight}, {0, 1, -weight}, {1, 0, -weight}, {1, 1, weight}};
  surf.stiffness.resize(2, 2);
  surf.stiffness.setFromTriplets(trips.begin(), trips.end());
  surf.stiffness.makeCompressed();
  return surf;
}

namespace {

double cotangent(const Eigen::Vector3d& apex, const Eigen::Vector3d& p, const Eigen::Vector3d& q) {
  Eigen::Vector3d e1 = p - apex;
  Eigen::Vector3d e2 = q - apex;
  return e1.dot(e2) / e1.cross(e2).norm();
}

void check_vertex_links(int nv, const std::vector<std::array<int, 3>>& faces) {
  // Around vertex i, face (i, j, k) contributes the link arc j -> k. A
  // manifold vertex has arcs forming one cycle.
  std::vector<std::map<int, int>> link(nv);
  for (const auto& f : faces) {
    for (int c = 0; c < 3; ++c) {
      int i = f[c], j = f[(c + 1) % 3], k = f[(c + 2) % 3];
      if (!link[i].emplace(j, k).second)
        throw MeshError("non-manifold vertex " + std::to_string(i));
    }
  }
  for (int i = 0; i < nv; ++i) {
    if (link[i].empty()) throw MeshError("vertex " + std::to_string(i) + " is not referenced by any face");
    int start = link[i].begin()->first;
    int cur = start;
    size_t steps = 0;
    do {
      auto it = link[i].find(cur);
      if (it == link[i].end())
        throw MeshError("vertex " + std::to_string(i) + " has an open link (boundary)");
      cur = it->second;
      ++steps;
    } while (cur != start && steps <= link[i].size());
    if (steps != link[i].size())
      throw MeshError("non-manifold vertex " + std::to_string(i) + " (link is not a single cycle)");
  }
}

} // namespace

LoadedMesh surface_from_triangles(const Eigen::MatrixX3d& positions,
                                  const std::vector<std::array<int, 3>>& faces,
                                  const MeshLoadOptions& options) {
  if (!(options.kbar < 0.0)) throw InvalidArgument("mesh: kbar must be negative");
  const int nv = static_cast<int>(positions.rows());
  if (nv < 3 || faces.empty()) throw MeshError("mesh has no triangles");

  for (const auto& f : faces) {
    for (int c = 0; c < 3; ++c)
      if (f[c] < 0 || f[c] >= nv) throw MeshError("face index out of range");
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) throw MeshError("degenerate face");
  }

  // Undirected edge -> (count, signed orientation sum).
  std::map<std::pair<int, int>, std::pair<int, int>> edges;
  for (const auto& f : faces) {
    for (int c = 0; c < 3; ++c) {
      int i = f[c], j = f[(c + 1) % 3];
      auto key = std::minmax(i, j);
      auto& e = edges[{key.first, key.second}];
      e.first += 1;
      e.second += (i < j) ? 1 : -1;
    }
  }
  for (const auto& [key, e] : edges) {
    std::string name = "(" + std::to_string(key.first) + ", " + std::to_string(key.second) + ")";
    if (e.first == 1) throw MeshError("boundary edge " + name + ": surface is not closed");
    if (e.first > 2) throw MeshError("non-manifold edge " + name);
    if (e.second != 0) throw MeshError("inconsistent orientation at edge " + name);
  }
  check_vertex_links(nv, faces);

  // Connectedness over the edge graph.
  std::vector<std::vector<int>> adj(nv);
  for (const auto& [key, e] : edges) {
    adj[key.first].push_back(key.second);
    adj[key.second].push_back(key.first);
  }
  std::vector<char> seen(nv, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
  }
  if (reached != nv) throw MeshError("mesh is not connected");

  LoadedMesh out;
  out.vertices = nv;
  out.edges = static_cast<int>(edges.size());
  out.faces = static_cast<int>(faces.size());
  out.euler_characteristic = out.vertices - out.edges + out.faces;
  if (out.euler_characteristic >= 0 && !options.allow_nonnegative_euler) {
    throw MeshError("Euler characteristic " + std::to_string(out.euler_characteristic) +
                    " is not negative (set allow_nonnegative_euler to override)");
  }
  double expected = 2.0 * std::numbers::pi * out.euler_characteristic;
  if (std::abs(options.kbar - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
    std::ostringstream msg;
    msg << "kbar = " << options.kbar << " differs from 2*pi*chi = " << expected
        << "; the background curvature is used as configured";
    out.warnings.push_back(msg.str());
  }

  Eigen::VectorXd areas = Eigen::VectorXd::Zero(nv);
  std::map<std::pair<int, int>, double> weight;
  for (const auto& f : faces) {
    Eigen::Vector3d p[3] = {positions.row(f[0]), positions.row(f[1]), positions.row(f[2])};
    double area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();
    if (!(area > 0.0)) throw MeshError("zero-area face");
    for (int c = 0; c < 3; ++c) {
      areas[f[c]] += area / 3.0;
      int i = f[(c + 1) % 3], j = f[(c + 2) % 3];
      double cot = cotangent(p[c], p[(c + 1) % 3], p[(c + 2) % 3]);
      weight[std::minmax(i, j)] += 0.5 * cot;
    }
  }
  double total = areas.sum();

  DiscreteSurface& surf = out.surface;
  surf.kind = SurfaceKind::TriangleMesh;
  surf.kbar = options.kbar;
  surf.positions = positions;
  surf.areas = areas / total;
  surf.euler_characteristic = out.euler_characteristic;

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(nv);
  for (const auto& [key, w] : weight) {
    if (w < 0.0) surf.delaunay = false;
    trips.emplace_back(key.first, key.second, -w);
    trips.emplace_back(key.second, key.first, -w);
    diag[key.first] += w;
    diag[key.second] += w;
  }
  for (int i = 0; i < nv; ++i) trips.emplace_back(i, i, diag[i]);
  surf.stiffness.resize(nv, nv);
  surf.stiffness.setFromTriplets(trips.begin(), trips.end());
  surf.stiffness.makeCompressed();
  if (!surf.delaunay)
    out.warnings.push_back("delaunay: false (negative cotangent weights); maximum-principle checks disabled");
  return out;
}

namespace {

std::string next_content_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
  }
  throw MeshError("unexpected end of file");
}

LoadedMesh parse_off(std::istream& in, const MeshLoadOptions& options) {
  std::string header = next_content_line(in);
  std::istringstream hs(header);
  std::string magic;
  hs >> magic;
  if (magic != "OFF") throw MeshError("missing OFF header");
  int nv = -1, nf = -1, ne = 0;
  if (!(hs >> nv)) {
    std::istringstream cs(next_content_line(in));
    cs >> nv >> nf >> ne;
  } else {
    hs >> nf >> ne;
  }
  if (nv <= 0 || nf <= 0) throw MeshError("bad OFF counts");
  Eigen::MatrixX3d pos(nv, 3);
  for (int i = 0; i < nv; ++i) {
    std::istringstream ls(next_content_line(in));
    if (!(ls >> pos(i, 0) >> pos(i, 1) >> pos(i, 2))) throw MeshError("bad OFF vertex line");
  }
  std::vector<std::array<int, 3>> faces(nf);
  for (int f = 0; f < nf; ++f) {
    std::istringstream ls(next_content_line(in));
    int k = 0;
    ls >> k;
    if (k != 3) throw MeshError("OFF face " + std::to_string(f) + " is not a triangle");
    if (!(ls >> faces[f][0] >> faces[f][1] >> faces[f][2])) throw MeshError("bad OFF face line");
  }
  return surface_from_triangles(pos, faces, options);
}

int parse_obj_index(const std::string& token, int nv) {
  int idx = std::stoi(token.substr(0, token.find('/')));
  if (idx < 0) return nv + idx;
  return idx - 1;
}

LoadedMesh parse_obj(std::istream& in, const MeshLoadOptions& options) {
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p[0] >> p[1] >> p[2])) throw MeshError("bad OBJ vertex at line " + std::to_string(lineno));
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<std::string> toks;
      std::string t;
      while (ls >> t) toks.push_back(t);
      if (toks.size() != 3) throw MeshError("OBJ face at line " + std::to_string(lineno) + " is not a triangle");
      std::array<int, 3> face{};
      try {
        for (int c = 0; c < 3; ++c) face[c] = parse_obj_index(toks[c], static_cast<int>(verts.size()));
      } catch (const std::logic_error&) {
        throw MeshError("bad OBJ face at line " + std::to_string(lineno));
      }
      faces.push_back(face);
    }
  }
  Eigen::MatrixX3d pos(static_cast<Eigen::Index>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) pos.row(static_cast<Eigen::Index>(i)) = verts[i];
  return surface_from_triangles(pos, faces, options);
}

} // namespace

LoadedMesh load_mesh(const std::string& path, const MeshLoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file '" + path + "'");
  std::string ext;
  if (auto dot = path.rfind('.'); dot != std::string::npos) {
    ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  }
  if (ext == "off") return parse_off(in, options);
  if (ext == "obj") return parse_obj(in, options);
  std::string first;
  in >> first;
  in.clear();
  in.seekg(0);
  if (first == "OFF") return parse_off(in, options);
  return parse_obj(in, options);
}

} // namespace curvflow
