#pragma once

#include <cstdint>
#include <string>

#include "hjpatch/safety_filter.hpp"
#include "hjpatch/solver_patch.hpp"
#include "hjpatch/systems.hpp"

namespace hjpatch {

struct RunConfig {
  std::string system_name;
  // Optional parameter overrides for the named system (currently only the
  // double integrator's input bound).
  double u_max = 0.0;  // 0 = system default

  // Grid override; empty vectors fall back to the system defaults.
  std::vector<double> grid_lo, grid_hi;
  std::vector<std::size_t> grid_shape;

  NumericsConfig numerics;
  PatchConfig patch;
  ConvergenceConfig convergence;
  FilterConfig filter;

  std::uint64_t seed = 0;
  std::string output_dir = ".";

  BenchmarkSystem make_system() const;
  GridPtr make_grid_for(const BenchmarkSystem& sys) const;
};

// Strict JSON parse: unknown keys anywhere raise ConfigError naming the key,
// as does a missing required key ("system").
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

}  // namespace hjpatch
