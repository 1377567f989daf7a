#pragma once

// Scenario configuration: YAML parsing, defaults, consistency checks and
// the canonical hash that ties report files to the run that produced them.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>
#include <json.hpp>

#include "warpconcave/errors.hpp"
#include "warpconcave/warped_geometry.hpp"

namespace warpconcave {

inline constexpr int kConfigVersion = 1;

enum class ProblemKind { elliptic, eigen, parabolic, heat_kernel };

inline std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::elliptic:
      return "elliptic";
    case ProblemKind::eigen:
      return "eigen";
    case ProblemKind::parabolic:
      return "parabolic";
    case ProblemKind::heat_kernel:
      return "heat_kernel";
  }
  return "?";
}

struct GeometrySpec {
  std::string factor = "space_form";  ///< space_form | cubic_perturbed | tabulated
  double K = 0.0;
  double c = 0.0;
  std::vector<double> nodes;
  std::vector<double> values;
  int N = 2;
  double R = 1.0;

  WarpedFactor make_factor() const {
    if (factor == "space_form") return WarpedFactor::space_form(K);
    if (factor == "cubic_perturbed") return WarpedFactor::cubic_perturbed(c);
    return WarpedFactor::tabulated(nodes, values);
  }
  Ball make_ball() const { return Ball(N, R, make_factor()); }
};

struct NonlinearitySpec {
  std::string kind = "heat";  ///< heat | power_absorption | power_source
  double lambda = 0.0;
  double exponent = 1.0;
};

struct InitialDataSpec {
  std::string kind = "bump";  ///< bump | ring | zero | eigen
  double power = 2.0;         ///< bump: (1 - (r/R)^2)^power
  double center = 0.5;        ///< ring: centre as a fraction of R
  double width = 0.1;         ///< ring: half-width as a fraction of R
};

struct ProblemSpec {
  ProblemKind kind = ProblemKind::elliptic;
  // elliptic
  double lambda = 1.0;
  double gamma = 0.0;
  // parabolic
  NonlinearitySpec nonlinearity;
  InitialDataSpec initial;
  double t_end = 1.0;
  double t_first = 1e-3;
  std::vector<double> times;  ///< explicit sample times; empty means doubling from t_first
  bool steady_state = false;
  // heat kernel
  bool delta_check = false;
};

struct SolverSpec {
  std::size_t M = 0;  ///< 0 selects the per-problem default
  double dt = 1e-4;
  double dt_max = 2e-4;
  double dt_growth = 1.05;
  double tol = 1e-8;
};

struct CertificationSpec {
  double delta = -1.0;  ///< negative: module default
  double eps = -1.0;    ///< negative: module default
  std::size_t n_pairs = 200;
  std::size_t n_params = 9;
  std::uint64_t seed = 0x5eed;
  bool geodesic = true;
};

struct OutputSpec {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
};

struct ScenarioConfig {
  int config_version = kConfigVersion;
  std::string name;
  GeometrySpec geometry;
  ProblemSpec problem;
  bool auto_alpha = true;
  std::vector<double> alphas;
  SolverSpec solver;
  CertificationSpec certification;
  OutputSpec outputs;

  bool wants(const std::string& format) const {
    for (const auto& f : outputs.formats) {
      if (f == format) return true;
    }
    return false;
  }

  std::size_t grid_size() const {
    if (solver.M != 0) return solver.M;
    switch (problem.kind) {
      case ProblemKind::parabolic:
        return 1024;
      case ProblemKind::heat_kernel:
        return 512;
      default:
        return 4096;
    }
  }
};

/// Malformed or inconsistent scenario file.
class ConfigError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

namespace detail {

inline void require_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline void forbid_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& forbidden) {
  for (const auto& key : forbidden) {
    if (node[key]) throw ConfigError(where + ": key '" + key + "' is not allowed here");
  }
}

template <class T>
T get(const YAML::Node& node, const std::string& key, const std::string& where, T fallback) {
  const YAML::Node n = node[key];
  if (!n) return fallback;
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
T need(const YAML::Node& node, const std::string& key, const std::string& where) {
  if (!node[key]) throw ConfigError(where + ": missing key '" + key + "'");
  return get<T>(node, key, where, T{});
}

inline void positive(double x, const std::string& what) {
  if (!(std::isfinite(x) && x > 0.0)) throw ConfigError(what + " must be positive and finite");
}

}  // namespace detail

/// Consistency checks that do not depend on how the config was built.
inline void validate(const ScenarioConfig& c) {
  if (c.config_version != kConfigVersion) {
    throw ConfigError("unsupported config_version " + std::to_string(c.config_version));
  }
  if (c.name.empty()) throw ConfigError("scenario name must not be empty");
  for (char ch : c.name) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) {
      throw ConfigError("scenario name may contain only letters, digits, '_', '-' and '.'");
    }
  }
  const auto& g = c.geometry;
  if (g.factor != "space_form" && g.factor != "cubic_perturbed" && g.factor != "tabulated") {
    throw ConfigError("geometry.factor must be space_form, cubic_perturbed or tabulated");
  }
  if (g.N < 2) throw ConfigError("geometry.N must be at least 2");
  detail::positive(g.R, "geometry.R");
  const auto& p = c.problem;
  for (double a : c.alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alphas must lie in [0, 1]");
  }
  if (!c.auto_alpha && c.alphas.empty()) throw ConfigError("alphas must not be empty");
  switch (p.kind) {
    case ProblemKind::elliptic:
      detail::positive(p.lambda, "problem.lambda");
      if (!(p.gamma >= 0.0 && p.gamma < 1.0)) {
        throw ConfigError("problem.gamma must lie in [0, 1); use the eigen problem for gamma = 1");
      }
      break;
    case ProblemKind::eigen:
      break;
    case ProblemKind::parabolic: {
      const auto& f = p.nonlinearity;
      if (f.kind != "heat" && f.kind != "power_absorption" && f.kind != "power_source") {
        throw ConfigError("problem.nonlinearity.kind must be heat, power_absorption or power_source");
      }
      if (f.kind == "power_absorption" && !(f.lambda >= 0.0 && f.exponent >= 1.0)) {
        throw ConfigError("power_absorption needs lambda >= 0 and exponent >= 1");
      }
      if (f.kind == "power_source" && !(f.lambda >= 0.0 && f.exponent >= 0.0 && f.exponent <= 1.0)) {
        throw ConfigError("power_source needs lambda >= 0 and exponent in [0, 1]");
      }
      if (p.steady_state && !(f.kind == "power_source" && f.lambda > 0.0 && f.exponent < 1.0)) {
        throw ConfigError("steady_state requires a power_source with lambda > 0 and exponent < 1");
      }
      const auto& i = p.initial;
      if (i.kind != "bump" && i.kind != "ring" && i.kind != "zero" && i.kind != "eigen") {
        throw ConfigError("problem.initial.kind must be bump, ring, zero or eigen");
      }
      if (i.kind == "bump") detail::positive(i.power, "problem.initial.power");
      if (i.kind == "ring") {
        detail::positive(i.width, "problem.initial.width");
        if (!(i.center - i.width > 0.0 && i.center + i.width < 1.0)) {
          throw ConfigError("ring must lie strictly inside the ball");
        }
      }
      detail::positive(p.t_end, "problem.t_end");
      detail::positive(p.t_first, "problem.t_first");
      if (p.times.empty() && p.t_first > p.t_end) throw ConfigError("problem.t_first exceeds t_end");
      for (double t : p.times) {
        if (!(t > 0.0 && t <= p.t_end)) throw ConfigError("problem.times must lie in (0, t_end]");
      }
      break;
    }
    case ProblemKind::heat_kernel:
      if (g.factor != "space_form" || g.K > 0.0) {
        throw ConfigError("heat_kernel needs a space_form geometry with K <= 0");
      }
      if (p.times.empty()) throw ConfigError("heat_kernel needs problem.times");
      for (double t : p.times) detail::positive(t, "problem.times entry");
      for (double a : c.alphas) {
        if (a != 0.0) throw ConfigError("heat_kernel certifies log-concavity only (alphas: [0])");
      }
      break;
  }
  const auto& s = c.solver;
  if (s.M != 0 && s.M < 16) throw ConfigError("solver.M must be at least 16");
  detail::positive(s.dt, "solver.dt");
  detail::positive(s.dt_max, "solver.dt_max");
  detail::positive(s.tol, "solver.tol");
  if (!(s.dt_growth >= 1.0)) throw ConfigError("solver.dt_growth must be >= 1");
  const auto& q = c.certification;
  if (q.n_pairs == 0 || q.n_params == 0) throw ConfigError("certification needs n_pairs and n_params >= 1");
  for (const auto& f : c.outputs.formats) {
    if (f != "csv" && f != "json" && f != "svg") throw ConfigError("outputs.formats entries must be csv, json or svg");
  }
}

inline ScenarioConfig parse_scenario(const YAML::Node& root) {
  using detail::get;
  using detail::need;
  ScenarioConfig c;
  detail::require_keys(root, "config",
                       {"config_version", "name", "geometry", "problem", "alphas", "solver", "certification",
                        "outputs"});
  if (!root["config_version"]) throw ConfigError("config_version is mandatory");
  c.config_version = need<int>(root, "config_version", "config");
  if (c.config_version != kConfigVersion) {
    throw ConfigError("unsupported config_version " + std::to_string(c.config_version));
  }
  c.name = need<std::string>(root, "name", "config");

  const YAML::Node g = root["geometry"];
  if (!g) throw ConfigError("config: missing key 'geometry'");
  detail::require_keys(g, "geometry", {"factor", "K", "c", "nodes", "values", "N", "R"});
  c.geometry.factor = need<std::string>(g, "factor", "geometry");
  c.geometry.N = need<int>(g, "N", "geometry");
  c.geometry.R = need<double>(g, "R", "geometry");
  if (c.geometry.factor == "space_form") {
    detail::forbid_keys(g, "geometry", {"c", "nodes", "values"});
    c.geometry.K = need<double>(g, "K", "geometry");
  } else if (c.geometry.factor == "cubic_perturbed") {
    detail::forbid_keys(g, "geometry", {"K", "nodes", "values"});
    c.geometry.c = need<double>(g, "c", "geometry");
  } else if (c.geometry.factor == "tabulated") {
    detail::forbid_keys(g, "geometry", {"K", "c"});
    c.geometry.nodes = need<std::vector<double>>(g, "nodes", "geometry");
    c.geometry.values = need<std::vector<double>>(g, "values", "geometry");
  }

  const YAML::Node p = root["problem"];
  if (!p) throw ConfigError("config: missing key 'problem'");
  const auto kind = need<std::string>(p, "kind", "problem");
  auto& pr = c.problem;
  if (kind == "elliptic") {
    pr.kind = ProblemKind::elliptic;
    detail::require_keys(p, "problem", {"kind", "lambda", "gamma"});
    pr.lambda = need<double>(p, "lambda", "problem");
    pr.gamma = need<double>(p, "gamma", "problem");
  } else if (kind == "eigen") {
    pr.kind = ProblemKind::eigen;
    detail::forbid_keys(p, "problem (eigen)", {"lambda", "gamma"});
    detail::require_keys(p, "problem", {"kind"});
  } else if (kind == "parabolic") {
    pr.kind = ProblemKind::parabolic;
    detail::require_keys(p, "problem", {"kind", "nonlinearity", "initial", "t_end", "t_first", "times",
                                        "steady_state"});
    const YAML::Node f = p["nonlinearity"];
    if (f) {
      detail::require_keys(f, "problem.nonlinearity", {"kind", "lambda", "exponent"});
      pr.nonlinearity.kind = need<std::string>(f, "kind", "problem.nonlinearity");
      if (pr.nonlinearity.kind == "heat") {
        detail::forbid_keys(f, "problem.nonlinearity (heat)", {"lambda", "exponent"});
      } else {
        pr.nonlinearity.lambda = need<double>(f, "lambda", "problem.nonlinearity");
        pr.nonlinearity.exponent = need<double>(f, "exponent", "problem.nonlinearity");
      }
    }
    const YAML::Node i = p["initial"];
    if (!i) throw ConfigError("problem: missing key 'initial'");
    detail::require_keys(i, "problem.initial", {"kind", "power", "center", "width"});
    pr.initial.kind = need<std::string>(i, "kind", "problem.initial");
    if (pr.initial.kind != "bump") detail::forbid_keys(i, "problem.initial", {"power"});
    if (pr.initial.kind != "ring") detail::forbid_keys(i, "problem.initial", {"center", "width"});
    pr.initial.power = get<double>(i, "power", "problem.initial", pr.initial.power);
    pr.initial.center = get<double>(i, "center", "problem.initial", pr.initial.center);
    pr.initial.width = get<double>(i, "width", "problem.initial", pr.initial.width);
    pr.t_end = need<double>(p, "t_end", "problem");
    pr.t_first = get<double>(p, "t_first", "problem", pr.t_first);
    pr.times = get<std::vector<double>>(p, "times", "problem", {});
    if (p["times"] && p["t_first"]) throw ConfigError("problem: give either times or t_first, not both");
    pr.steady_state = get<bool>(p, "steady_state", "problem", false);
  } else if (kind == "heat_kernel") {
    pr.kind = ProblemKind::heat_kernel;
    detail::require_keys(p, "problem", {"kind", "times", "delta_check"});
    pr.times = need<std::vector<double>>(p, "times", "problem");
    pr.delta_check = get<bool>(p, "delta_check", "problem", false);
  } else {
    throw ConfigError("problem.kind must be elliptic, eigen, parabolic or heat_kernel");
  }

  const YAML::Node a = root["alphas"];
  if (!a || (a.IsScalar() && a.as<std::string>() == "auto")) {
    c.auto_alpha = true;
  } else if (a.IsSequence()) {
    c.auto_alpha = false;
    c.alphas = get<std::vector<double>>(root, "alphas", "config", {});
  } else {
    throw ConfigError("alphas must be a list of numbers or 'auto'");
  }

  if (const YAML::Node s = root["solver"]) {
    detail::require_keys(s, "solver", {"M", "dt", "dt_max", "dt_growth", "tol"});
    c.solver.M = get<std::size_t>(s, "M", "solver", 0);
    c.solver.dt = get<double>(s, "dt", "solver", c.solver.dt);
    c.solver.dt_max = get<double>(s, "dt_max", "solver", c.solver.dt_max);
    c.solver.dt_growth = get<double>(s, "dt_growth", "solver", c.solver.dt_growth);
    c.solver.tol = get<double>(s, "tol", "solver", c.solver.tol);
  }
  if (const YAML::Node q = root["certification"]) {
    detail::require_keys(q, "certification", {"delta", "eps", "n_pairs", "n_params", "seed", "geodesic"});
    auto& cq = c.certification;
    cq.delta = get<double>(q, "delta", "certification", cq.delta);
    cq.eps = get<double>(q, "eps", "certification", cq.eps);
    cq.n_pairs = get<std::size_t>(q, "n_pairs", "certification", cq.n_pairs);
    cq.n_params = get<std::size_t>(q, "n_params", "certification", cq.n_params);
    cq.seed = get<std::uint64_t>(q, "seed", "certification", cq.seed);
    cq.geodesic = get<bool>(q, "geodesic", "certification", cq.geodesic);
  }
  if (const YAML::Node o = root["outputs"]) {
    detail::require_keys(o, "outputs", {"directory", "formats"});
    c.outputs.directory = get<std::string>(o, "directory", "outputs", c.outputs.directory);
    c.outputs.formats = get<std::vector<std::string>>(o, "formats", "outputs", c.outputs.formats);
  }
  validate(c);
  return c;
}

inline ScenarioConfig parse_scenario_text(const std::string& text) {
  try {
    return parse_scenario(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML: ") + e.what());
  }
}

inline ScenarioConfig load_scenario(const std::string& path) {
  try {
    return parse_scenario(YAML::LoadFile(path));
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config file " + path);
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Normalised form of every field that influences results. Output
/// settings are excluded so that relocating a run does not change its hash.
inline nlohmann::ordered_json canonical_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["config_version"] = c.config_version;
  j["name"] = c.name;
  auto& g = j["geometry"];
  g["factor"] = c.geometry.factor;
  if (c.geometry.factor == "space_form") g["K"] = c.geometry.K;
  if (c.geometry.factor == "cubic_perturbed") g["c"] = c.geometry.c;
  if (c.geometry.factor == "tabulated") {
    g["nodes"] = c.geometry.nodes;
    g["values"] = c.geometry.values;
  }
  g["N"] = c.geometry.N;
  g["R"] = c.geometry.R;
  auto& p = j["problem"];
  p["kind"] = to_string(c.problem.kind);
  switch (c.problem.kind) {
    case ProblemKind::elliptic:
      p["lambda"] = c.problem.lambda;
      p["gamma"] = c.problem.gamma;
      break;
    case ProblemKind::eigen:
      break;
    case ProblemKind::parabolic: {
      const auto& f = c.problem.nonlinearity;
      p["nonlinearity"] = {{"kind", f.kind}, {"lambda", f.lambda}, {"exponent", f.exponent}};
      const auto& i = c.problem.initial;
      p["initial"] = {{"kind", i.kind}, {"power", i.power}, {"center", i.center}, {"width", i.width}};
      p["t_end"] = c.problem.t_end;
      p["t_first"] = c.problem.t_first;
      p["times"] = c.problem.times;
      p["steady_state"] = c.problem.steady_state;
      break;
    }
    case ProblemKind::heat_kernel:
      p["times"] = c.problem.times;
      p["delta_check"] = c.problem.delta_check;
      break;
  }
  if (c.auto_alpha) {
    j["alphas"] = "auto";
  } else {
    j["alphas"] = c.alphas;
  }
  j["solver"] = {{"M", c.grid_size()},
                 {"dt", c.solver.dt},
                 {"dt_max", c.solver.dt_max},
                 {"dt_growth", c.solver.dt_growth},
                 {"tol", c.solver.tol}};
  const auto& q = c.certification;
  j["certification"] = {{"delta", q.delta},   {"eps", q.eps},   {"n_pairs", q.n_pairs},
                        {"n_params", q.n_params}, {"seed", q.seed}, {"geodesic", q.geodesic}};
  return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string scenario_hash(const ScenarioConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_json(c).dump())));
  return buf;
}

}  // namespace warpconcave
