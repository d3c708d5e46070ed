#pragma once

#include <cstdint>
#include <vector>

#include "hjpatch/dynamics.hpp"
#include "hjpatch/grid.hpp"
#include "hjpatch/systems.hpp"

namespace hjpatch {

enum class FilterStatus { NominalFeasible, Modified, InfeasibleClamped };

struct FilterConfig {
  // Linear class-K slope: the constraint is <grad V, xdot> + gamma V >= 0.
  double gamma = 1.0;
  // Diagonal entries of the control weight R; empty selects identity.
  std::vector<double> r_diag;
  // Slack-penalty weight applied only when the hard constraint is
  // infeasible over the input box; 0 keeps the bang-bang fallback. Relaxed
  // solutions still report infeasible-clamped.
  double relaxation_weight = 0.0;

  void validate() const;
};

struct FilterDecision {
  std::vector<double> control;
  FilterStatus status = FilterStatus::NominalFeasible;
  // a.u - b at the returned control; nonnegative unless infeasible.
  double constraint_margin = 0.0;
  // Value/gradient interpolation had to clamp x into the grid box.
  bool clamped_state = false;
};

// Minimally modifies u_nom in the R-metric subject to the interpolated CBF
// halfspace a.u >= b (a = G(x)^T grad V, b = -gamma V - <grad V, drift>) and
// the input box. Exact for diagonal R: the KKT path u(lambda) =
// clip(u_nom + lambda R^-1 a / 2) is piecewise linear in lambda, so the
// smallest feasible multiplier is found by a breakpoint scan. When even the
// constraint-maximizing vertex fails the halfspace, returns that vertex
// (or, with relaxation enabled, the exact penalized box-QP minimizer).
FilterDecision filter_control(const ScalarField& V,
                              const ControlAffineDynamics& d,
                              std::span<const double> x,
                              std::span<const double> u_nom,
                              const FilterConfig& cfg);

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> controls;
  // Interpolated barrier value at each state.
  std::vector<double> h_values;
  // True constraint-set membership, independent of the value function.
  std::vector<std::uint8_t> safe_flags;
  std::vector<std::uint8_t> filter_active_flags;
  // Steps whose value lookup clamped an off-grid state.
  std::vector<std::uint8_t> clamped_flags;
  // State escaped the inflated grid box; trajectory truncated there.
  bool diverged = false;
};

// Zero-order-hold closed loop: u is decided at each sample (filtered unless
// use_filter is false) and held through one classical 4th-order integration
// step. Truncates with the diverged flag when the state leaves the grid box
// inflated by divergence_margin times its extent per axis.
Trajectory rollout(const ScalarField& V, const ControlAffineDynamics& d,
                   const ConstraintBox& constraint, const Policy& nominal,
                   std::span<const double> x0, double horizon, double dt,
                   const FilterConfig& cfg, bool use_filter = true,
                   double divergence_margin = 1.0);

struct RolloutMetrics {
  // Percentages in [0, 100].
  double unsafe_state_share = 0.0;
  double unsafe_rollout_share = 0.0;
  double filter_activity = 0.0;
  double clamped_state_share = 0.0;
  std::size_t diverged_count = 0;
  // Mean duration of unsafe episodes (diagnostic; 0 when none).
  double mean_recovery_time = 0.0;
  std::size_t unsafe_episodes = 0;
};

RolloutMetrics evaluate_rollouts(std::span<const Trajectory> batch);

// Rejection-samples states uniform over the grid box with interpolated
// V >= margin. Deterministic under seed; EmptySafeSet when the acceptance
// budget (10^4 proposals per requested sample) runs out.
std::vector<std::vector<double>> sample_safe_starts(const ScalarField& V,
                                                    std::size_t count,
                                                    double margin,
                                                    std::uint64_t seed);

}  // namespace hjpatch
