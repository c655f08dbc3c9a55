#include "curvflow/harness/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace curvflow::harness {

using nlohmann::json;

ConfigError::ConfigError(const std::string& message, std::string p, int l, int c)
    : Error(message), path(std::move(p)), line(l), column(c) {}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"constant-f", "sign-changing", "low-energy-bump", "generic"};
  return names;
}

namespace {

// Object reader that tracks which keys were consumed so that typos surface
// as errors instead of silently falling back to defaults.
class Reader {
public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw ConfigError(child(key) + ": unknown key \"" + key + "\"", child(key));
  }

  [[noreturn]] void fail(const std::string& msg, const std::string& key = {}) const {
    std::string p = key.empty() ? path_ : child(key);
    throw ConfigError((p.empty() ? std::string("/") : p) + ": " + msg, p);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  Reader object(const std::string& key) {
    used_.insert(key);
    return Reader(j_.at(key), child(key));
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) fail("expected a number", key);
    double x = v.get<double>();
    if (!std::isfinite(x)) fail("expected a finite number", key);
    return x;
  }

  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) fail("expected an integer", key);
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail("expected true or false", key);
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) fail("expected a string", key);
    return v.get<std::string>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
  }

  Eigen::Vector3d point(const std::string& key, const Eigen::Vector3d& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_array() || v.size() < 2 || v.size() > 3) fail("expected [x, y] or [x, y, z]", key);
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    for (size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number()) fail("expected numeric coordinates", key);
      p[static_cast<int>(k)] = v[k].get<double>();
    }
    return p;
  }

  std::string child(const std::string& key) const { return path_ + "/" + key; }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

SurfaceSpec parse_surface(Reader r, const std::filesystem::path& base) {
  SurfaceSpec s;
  std::string type = r.string("type");
  s.kbar = r.number("kbar", -1.0);
  if (!(s.kbar < 0.0)) r.fail("kbar must be negative", "kbar");
  if (type == "grid") {
    s.type = SurfaceType::Grid;
    s.n = r.integer("n", 16);
    if (s.n < 2) r.fail("grid size must be at least 2", "n");
  } else if (type == "two-vertex") {
    s.type = SurfaceType::TwoVertex;
    s.weight = r.number("weight", 1.0);
    if (!(s.weight > 0.0)) r.fail("weight must be positive", "weight");
  } else if (type == "mesh") {
    s.type = SurfaceType::Mesh;
    s.path = resolve(base, r.string("path"));
    s.allow_nonnegative_euler = r.boolean("allow_nonnegative_euler", false);
  } else {
    r.fail("unknown surface type \"" + type + "\" (grid, two-vertex, mesh)", "type");
  }
  return s;
}

FieldSpec parse_f(Reader r, const std::filesystem::path& base, std::optional<std::filesystem::path>& file) {
  std::string type = r.string("type");
  if (type == "constant") return ConstantField{r.number("value")};
  if (type == "cos-bump") {
    CosBumpField s;
    s.base = r.number("base", s.base);
    s.amplitude = r.number("amplitude", s.amplitude);
    s.center = r.point("center", s.center);
    s.radius = r.number("radius", s.radius);
    if (!(s.radius > 0.0)) r.fail("radius must be positive", "radius");
    return s;
  }
  if (type == "neg-constant-plus-bump") {
    NegConstantPlusBumpField s;
    s.c = r.number("c", s.c);
    s.height = r.number("height", s.c);
    s.center = r.point("center", s.center);
    s.radius = r.number("radius", s.radius);
    if (!(s.radius > 0.0)) r.fail("radius must be positive", "radius");
    return s;
  }
  if (type == "capped-max-zero") {
    CappedMaxZeroField s;
    s.base = r.number("base", s.base);
    s.amplitude = r.number("amplitude", s.amplitude);
    s.kx = r.integer("kx", s.kx);
    s.ky = r.integer("ky", s.ky);
    s.offset = r.number("offset", s.offset);
    return s;
  }
  if (type == "file") {
    file = resolve(base, r.string("path"));
    return SampledField{};
  }
  r.fail("unknown f type \"" + type + "\" (constant, cos-bump, neg-constant-plus-bump, capped-max-zero, file)",
         "type");
}

U0Spec parse_u0(Reader r, const std::filesystem::path& base) {
  U0Spec s;
  std::string type = r.string("type");
  if (type == "constant") {
    s.kind = U0Spec::Kind::Constant;
  } else if (type == "bump") {
    s.kind = U0Spec::Kind::Bump;
    s.center = r.point("center", s.center);
    s.radius = r.number("radius", s.radius);
    if (!(s.radius > 0.0)) r.fail("radius must be positive", "radius");
  } else if (type == "random") {
    s.kind = U0Spec::Kind::Random;
    s.amplitude = r.number("amplitude", s.amplitude);
    if (!(s.amplitude >= 0.0)) r.fail("amplitude must be nonnegative", "amplitude");
  } else if (type == "file") {
    s.kind = U0Spec::Kind::File;
    s.path = resolve(base, r.string("path"));
  } else {
    r.fail("unknown u0 type \"" + type + "\" (constant, bump, random, file)", "type");
  }
  return s;
}

FlowConfig parse_flow(Reader r) {
  FlowConfig c;
  if (r.has("dt0")) c.dt0 = r.number("dt0");
  c.dt_min = r.number("dt_min", c.dt_min);
  c.dt_max = r.number("dt_max", c.dt_max);
  c.tol_F = r.number("tol_F", c.tol_F);
  c.tol_res = r.number("tol_res", c.tol_res);
  c.max_steps = r.integer("max_steps", c.max_steps);
  c.picard_iters = r.integer("picard_iters", c.picard_iters);
  c.project_volume = r.boolean("project_volume", c.project_volume);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    r.fail(e.what());
  }
  return c;
}

std::vector<double> parse_lambda_grid(Reader& parent) {
  const json& v = parent.raw("lambda_grid");
  const std::string path = parent.child("lambda_grid");
  std::vector<double> grid;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(path + ": expected numbers", path);
      grid.push_back(x.get<double>());
    }
  } else {
    Reader r(v, path);
    double start = r.number("start"), stop = r.number("stop"), step = r.number("step");
    if (!(step > 0.0) || !(stop >= start)) r.fail("need step > 0 and stop >= start");
    long count = std::lround(std::floor((stop - start) / step + 1e-9));
    if (count > 100000) r.fail("lambda grid too large");
    for (long k = 0; k <= count; ++k) grid.push_back(start + static_cast<double>(k) * step);
  }
  if (grid.empty()) throw ConfigError(path + ": empty lambda grid", path);
  for (size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw ConfigError(path + ": must be strictly increasing", path);
  return grid;
}

Assertions parse_assertions(Reader r, Assertions a) {
  a.converged = r.boolean("converged", a.converged);
  a.lambda_positive = r.boolean("lambda_positive", a.lambda_positive);
  a.stab_eig_negative = r.boolean("stab_eig_negative", a.stab_eig_negative);
  a.flow_bounds = r.boolean("flow_bounds", a.flow_bounds);
  if (r.has("lambda_expected")) a.lambda_expected = r.number("lambda_expected");
  a.lambda_tol = r.number("lambda_tol", a.lambda_tol);
  if (r.has("u_constant_tol")) a.u_constant_tol = r.number("u_constant_tol");
  a.branch_monotone = r.boolean("branch_monotone", a.branch_monotone);
  a.branch_stable_below_zero = r.boolean("branch_stable_below_zero", a.branch_stable_below_zero);
  return a;
}

std::pair<int, int> line_column(const std::string& text, size_t byte) {
  int line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      ++col;
    }
  }
  return {line, col};
}

} // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports the byte just past the offending token.
    auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    // Drop the library's own "[...] parse error at line L, column C: " prefix.
    std::string what = e.what();
    auto pos = what.find("parse error");
    if (pos != std::string::npos) pos = what.find(": ", pos);
    std::ostringstream msg;
    msg << "line " << line << ", column " << col << ": " << (pos == std::string::npos ? what : what.substr(pos + 2));
    throw ConfigError(msg.str(), {}, line, col);
  }

  ExperimentConfig cfg;
  {
    Reader r(doc, "");
    cfg.scenario = r.string("scenario", "generic");
    const auto& names = scenario_names();
    if (std::find(names.begin(), names.end(), cfg.scenario) == names.end())
      r.fail("unknown scenario \"" + cfg.scenario + "\"", "scenario");

    if (!r.has("surface")) r.fail("missing \"surface\"");
    cfg.surface = parse_surface(r.object("surface"), base_dir);
    if (!r.has("f")) r.fail("missing \"f\"");
    cfg.f = parse_f(r.object("f"), base_dir, cfg.f_file);
    cfg.A = r.number("A", 1.0);
    if (!(cfg.A > 0.0)) r.fail("A must be positive", "A");

    if (r.has("u0")) {
      cfg.u0 = parse_u0(r.object("u0"), base_dir);
    } else if (cfg.scenario == "low-energy-bump") {
      cfg.u0.kind = U0Spec::Kind::Bump;
    }
    if (cfg.u0.kind == U0Spec::Kind::Bump && cfg.A < 1.0) r.fail("the bump datum needs A >= 1", "A");

    if (r.has("flow")) cfg.flow = parse_flow(r.object("flow"));
    if (r.has("lambda_grid")) cfg.lambda_grid = parse_lambda_grid(r);

    Assertions defaults;
    if (cfg.scenario == "sign-changing") defaults.lambda_positive = true;
    if (cfg.scenario == "low-energy-bump") {
      defaults.lambda_positive = true;
      defaults.stab_eig_negative = true;
    }
    if (cfg.scenario == "constant-f") {
      const auto* c = std::get_if<ConstantField>(&cfg.f);
      if (!c) r.fail("scenario constant-f needs a constant f", "f");
      defaults.lambda_expected = cfg.surface.kbar / cfg.A - c->value;
      defaults.u_constant_tol = 1e-7;
    }
    cfg.assertions = r.has("assertions") ? parse_assertions(r.object("assertions"), defaults) : defaults;

    if (r.has("seed")) {
      const json& s = r.raw("seed");
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
        r.fail("expected a nonnegative integer", "seed");
      cfg.seed = s.get<std::uint64_t>();
    }
    if (r.has("output_dir")) cfg.output_dir = resolve(base_dir, r.string("output_dir"));
  }
  cfg.canonical = doc.dump();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

ScalarField read_field_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open field file " + path.string());
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    try {
      size_t used = 0;
      double v = std::stod(token, &used);
      if (used != token.size() || !std::isfinite(v)) throw std::invalid_argument(token);
      values.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("field file " + path.string() + ": not a number: \"" + token + "\"");
    }
  }
  return Eigen::Map<ScalarField>(values.data(), static_cast<Eigen::Index>(values.size()));
}

DiscreteSurface build_surface(const ExperimentConfig& cfg, std::vector<std::string>* warnings) {
  const SurfaceSpec& s = cfg.surface;
  switch (s.type) {
  case SurfaceType::Grid: return build_periodic_grid(s.n, s.kbar);
  case SurfaceType::TwoVertex: return build_two_vertex(s.weight, s.kbar);
  case SurfaceType::Mesh: {
    LoadedMesh m = load_mesh(s.path.string(), {.kbar = s.kbar, .allow_nonnegative_euler = s.allow_nonnegative_euler});
    if (warnings) warnings->insert(warnings->end(), m.warnings.begin(), m.warnings.end());
    return m.surface;
  }
  }
  throw ConfigError("unknown surface type");
}

ScalarField build_f(const ExperimentConfig& cfg, const DiscreteSurface& surf) {
  if (cfg.f_file) {
    ScalarField v = read_field_file(*cfg.f_file);
    if (v.size() != surf.n())
      throw ConfigError("f file has " + std::to_string(v.size()) + " values, surface has " +
                        std::to_string(surf.n()) + " vertices", "/f/path");
    return v;
  }
  return evaluate(cfg.f, surf);
}

ScalarField build_u0(const ExperimentConfig& cfg, const DiscreteSurface& surf) {
  const double A = cfg.A;
  switch (cfg.u0.kind) {
  case U0Spec::Kind::Constant: return ScalarField::Constant(surf.n(), 0.5 * std::log(A));
  case U0Spec::Kind::Bump: return low_energy_bump(surf, cfg.u0.center, cfg.u0.radius, A).u0;
  case U0Spec::Kind::Random: {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    ScalarField u(surf.n());
    for (int i = 0; i < surf.n(); ++i) u[i] = cfg.u0.amplitude * dist(rng);
    return project_to_volume(surf, u, A);
  }
  case U0Spec::Kind::File: {
    ScalarField u = read_field_file(cfg.u0.path);
    if (u.size() != surf.n())
      throw ConfigError("u0 file has " + std::to_string(u.size()) + " values, surface has " +
                        std::to_string(surf.n()) + " vertices", "/u0/path");
    return project_to_volume(surf, u, A);
  }
  }
  throw ConfigError("unknown u0 kind");
}

} // namespace curvflow::harness
