#include "hjpatch/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hjpatch {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& scope,
                         const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + scope + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + std::string(key) +
                      "': " + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse failure: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown_keys(root, "",
                      {"system", "grid", "numerics", "patch", "convergence",
                       "filter", "seed", "output_dir"});

  RunConfig cfg;
  if (!root.contains("system"))
    throw ConfigError("config: missing required key 'system'");
  const json& sys = root.at("system");
  if (sys.is_string()) {
    cfg.system_name = sys.get<std::string>();
  } else if (sys.is_object()) {
    reject_unknown_keys(sys, "system.", {"name", "u_max"});
    if (!sys.contains("name"))
      throw ConfigError("config: missing required key 'system.name'");
    cfg.system_name = sys.at("name").get<std::string>();
    cfg.u_max = get_or(sys, "u_max", 0.0);
  } else {
    throw ConfigError("config: 'system' must be a name or an object");
  }

  if (root.contains("grid")) {
    const json& grid = root.at("grid");
    reject_unknown_keys(grid, "grid.", {"lo", "hi", "shape"});
    cfg.grid_lo = get_or(grid, "lo", std::vector<double>{});
    cfg.grid_hi = get_or(grid, "hi", std::vector<double>{});
    cfg.grid_shape = get_or(grid, "shape", std::vector<std::size_t>{});
  }

  if (root.contains("numerics")) {
    const json& num = root.at("numerics");
    reject_unknown_keys(
        num, "numerics.",
        {"stencil_order", "cfl_factor", "dissipation_mode", "max_step"});
    cfg.numerics.stencil_order =
        get_or<std::size_t>(num, "stencil_order", cfg.numerics.stencil_order);
    cfg.numerics.cfl_factor =
        get_or(num, "cfl_factor", cfg.numerics.cfl_factor);
    cfg.numerics.max_step = get_or(num, "max_step", cfg.numerics.max_step);
    const std::string mode =
        get_or<std::string>(num, "dissipation_mode", "global-bound");
    if (mode == "global-bound") {
      cfg.numerics.dissipation_mode = DissipationMode::GlobalBound;
    } else if (mode == "local") {
      cfg.numerics.dissipation_mode = DissipationMode::Local;
    } else {
      throw ConfigError("config: numerics.dissipation_mode must be "
                        "'global-bound' or 'local', got '" +
                        mode + "'");
    }
    cfg.numerics.validate();
  }

  if (root.contains("patch")) {
    const json& p = root.at("patch");
    reject_unknown_keys(
        p, "patch.", {"zeta", "pad_radius", "decrease_tol", "max_iterations"});
    cfg.patch.zeta = get_or(p, "zeta", cfg.patch.zeta);
    cfg.patch.pad_radius =
        get_or<std::size_t>(p, "pad_radius", cfg.patch.pad_radius);
    cfg.patch.decrease_tol = get_or(p, "decrease_tol", cfg.patch.decrease_tol);
    cfg.patch.max_iterations =
        get_or<std::size_t>(p, "max_iterations", cfg.patch.max_iterations);
  }

  if (root.contains("convergence")) {
    const json& c = root.at("convergence");
    reject_unknown_keys(c, "convergence.", {"tol", "max_sweeps"});
    cfg.convergence.tol = get_or(c, "tol", cfg.convergence.tol);
    cfg.convergence.max_sweeps =
        get_or<std::size_t>(c, "max_sweeps", cfg.convergence.max_sweeps);
    cfg.convergence.validate();
  }

  if (root.contains("filter")) {
    const json& f = root.at("filter");
    reject_unknown_keys(f, "filter.",
                        {"gamma", "r_diag", "relaxation_weight"});
    cfg.filter.gamma = get_or(f, "gamma", cfg.filter.gamma);
    cfg.filter.r_diag = get_or(f, "r_diag", cfg.filter.r_diag);
    cfg.filter.relaxation_weight =
        get_or(f, "relaxation_weight", cfg.filter.relaxation_weight);
    cfg.filter.validate();
  }

  cfg.seed = get_or<std::uint64_t>(root, "seed", 0);
  cfg.output_dir = get_or<std::string>(root, "output_dir", ".");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOFailure("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

BenchmarkSystem RunConfig::make_system() const {
  if (system_name == "double_integrator")
    return double_integrator(u_max > 0.0 ? u_max : 1.0);
  if (u_max != 0.0)
    throw ConfigError("config: u_max override only applies to the double "
                      "integrator");
  return benchmark_by_name(system_name);
}

GridPtr RunConfig::make_grid_for(const BenchmarkSystem& sys) const {
  const std::vector<double>& lo = grid_lo.empty() ? sys.grid_lo : grid_lo;
  const std::vector<double>& hi = grid_hi.empty() ? sys.grid_hi : grid_hi;
  const std::vector<std::size_t>& shape =
      grid_shape.empty() ? sys.default_shape : grid_shape;
  return make_grid(lo, hi, shape);
}

}  // namespace hjpatch
