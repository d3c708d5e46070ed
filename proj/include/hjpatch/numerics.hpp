#pragma once

#include <cstddef>
#include <vector>

#include "hjpatch/dynamics.hpp"
#include "hjpatch/grid.hpp"

namespace hjpatch {

enum class DissipationMode { GlobalBound, Local };

struct NumericsConfig {
  // One-sided difference order, 1 or 2. Neighbor-raise monotonicity is a
  // p=1 property; p=2 trades it for interior accuracy.
  std::size_t stencil_order = 1;
  double cfl_factor = 0.8;
  // Scope of the speed bounds behind the CFL step; the Hamiltonian upwinds
  // per axis either way.
  DissipationMode dissipation_mode = DissipationMode::GlobalBound;
  // Step returned when every speed bound is zero, and cap otherwise.
  double max_step = 1.0;

  void validate() const;
};

// Per-dimension left/right one-sided differences of order p. At grid faces
// the missing side equals the interior one-sided difference (linear ghost
// extrapolation), so both sides agree there.
void upwind_gradients(const ScalarField& f, std::span<const std::size_t> idx,
                      const NumericsConfig& cfg, std::span<double> grad_minus,
                      std::span<double> grad_plus);

// Per-dimension bound on |xdot_i| over the input box at one state.
void local_speed_bound(const ControlAffineDynamics& d,
                       std::span<const double> x, std::span<double> alpha);

// Dissipation coefficients for global-bound mode: max of the local speed
// bound over every grid node.
std::vector<double> dissipation_bounds(const ControlAffineDynamics& d,
                                       const Grid& g);

// Upwind numerical Hamiltonian
//   H = max_u sum_i f_i(x,u) * (f_i >= 0 ? grad_plus_i : grad_minus_i),
// the Lax-Friedrichs form with the exact per-axis speed |f_i(x,u)| as the
// jump coefficient, taken inside the max. Each axis reads the one-sided
// difference from the side its flow component points to, so with p=1
// raising any stencil neighbor can only raise H, and the downwind bias
// leaves fields with H >= 0 everywhere as exact fixed points of the value
// update (a two-sided jump term does not: it keeps eating curved regions).
// The max is exact: the axis terms are piecewise linear in u, so it is
// attained at a box vertex, where a switching line f_i(u) = 0 crosses the
// box edge, or where two switching lines intersect. Supports input_dim <= 2
// (ConfigError beyond).
double upwind_hamiltonian(const ControlAffineDynamics& d,
                          std::span<const double> x,
                          std::span<const double> grad_minus,
                          std::span<const double> grad_plus);

struct HamiltonianResult {
  double value;
  std::vector<double> alphas;
};

// Wrapper returning the upwind Hamiltonian together with the speed bounds
// that feed cfl_timestep. The mode scopes the bounds only: local computes
// them at x, global-bound consumes precomputed dissipation_bounds
// (required, ConfigError if absent). H itself is mode-independent.
HamiltonianResult numerical_hamiltonian(const ControlAffineDynamics& d,
                                        std::span<const double> x,
                                        std::span<const double> grad_minus,
                                        std::span<const double> grad_plus,
                                        const NumericsConfig& cfg,
                                        std::span<const double> global_alphas = {});

// Delta = min(cfl_factor / sum_i(alpha_i / spacing_i), max_step); all-zero
// alphas fall back to max_step.
double cfl_timestep(std::span<const double> alphas, const Grid& g,
                    const NumericsConfig& cfg);

// Per-solve kernel: precomputes node coordinates and the grid-wide speed
// bounds, then evaluates the upwind Hamiltonian per cell with no heap
// traffic. Shared by the global and patch solvers so their updates are
// bitwise identical on common cells.
class LevelSetKernel {
 public:
  LevelSetKernel(const ControlAffineDynamics& d, GridPtr grid,
                 NumericsConfig cfg);

  // H at node idx; flat must equal grid.flatten(idx). Reads the stencil from
  // `values`, which must hold one value per grid node.
  double hamiltonian(std::span<const double> values,
                     std::span<const std::size_t> idx, std::size_t flat) const;

  // CFL step from the global speed bounds (also valid in local mode, where
  // per-cell coefficients are only smaller).
  double timestep() const { return dt_; }
  std::span<const double> global_alphas() const { return alphas_; }
  const NumericsConfig& config() const { return cfg_; }
  const Grid& grid() const { return *grid_; }
  const ControlAffineDynamics& dynamics() const { return dyn_; }

 private:
  const ControlAffineDynamics& dyn_;
  GridPtr grid_;
  NumericsConfig cfg_;
  std::vector<double> alphas_;
  double dt_ = 0.0;
  // coords_[coord_offset_[d] + i] = lo_d + i * spacing_d
  std::vector<double> coords_;
  std::size_t coord_offset_[kMaxDims] = {};
};

}  // namespace hjpatch
