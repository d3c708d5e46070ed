#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "hjpatch/numerics.hpp"

namespace hjpatch {

struct ConvergenceConfig {
  // A sweep whose largest decrease rate (decrease / step) stays at or below
  // tol is converged; the same rate gates whether a cell is written at all,
  // so a converged sweep leaves the field bit-identical.
  double tol = 1e-4;
  std::size_t max_sweeps = 50'000;

  void validate() const {
    if (!(tol > 0.0)) throw ConfigError("convergence: tol must be positive");
    if (max_sweeps == 0)
      throw ConfigError("convergence: max_sweeps must be positive");
  }
};

struct SolveStats {
  std::size_t sweeps = 0;
  // Total per-cell Hamiltonian computations across all sweeps.
  std::size_t hamiltonian_evals = 0;
  // Largest per-cell decrease rate seen in each sweep.
  std::vector<double> max_residual_history;
  double wall_time = 0.0;
  bool converged = false;
};

struct StepResult {
  // Largest Delta * max(0, -H) over the sweep, before write gating.
  double max_decrease = 0.0;
  double step = 0.0;
  std::size_t evals = 0;
  std::size_t cells_written = 0;
};

// One Jacobi sweep over every cell: out[i] = V[i] + Delta * min(0, H_i),
// written only when the decrease rate max(0, -H_i) exceeds write_rate_tol.
// All stencil reads come from V, so out must not alias V.
StepResult global_step(const ScalarField& V, ScalarField& out,
                       const LevelSetKernel& kernel,
                       double write_rate_tol = 0.0, unsigned threads = 1);

// Allocating convenience form of the sweep.
std::pair<ScalarField, StepResult> global_step(const ScalarField& V,
                                               const ControlAffineDynamics& d,
                                               const NumericsConfig& cfg);

// Sweeps to the fixed point of V <- V + Delta min(0, H). Non-convergence
// within max_sweeps is reported through stats.converged, not thrown, so the
// best iterate is always returned.
std::pair<ScalarField, SolveStats> solve_global(const ScalarField& V0,
                                                const ControlAffineDynamics& d,
                                                const NumericsConfig& cfg,
                                                const ConvergenceConfig& conv,
                                                unsigned threads = 1);

}  // namespace hjpatch
