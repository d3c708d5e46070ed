#pragma once

#include <cstddef>
#include <cstdint>
#include <tuple>
#include <vector>

#include "hjpatch/solver_global.hpp"

namespace hjpatch {

// Set of active cells, stored as sorted flat indices plus a dense membership
// mask. Iteration order is index order, so runs are reproducible.
class ActiveSet {
 public:
  explicit ActiveSet(GridPtr grid);
  // Deduplicates, validates range, sorts.
  static ActiveSet from_flats(GridPtr grid, std::vector<std::size_t> flats);

  bool contains(std::size_t flat) const { return mask_[flat] != 0; }
  const std::vector<std::size_t>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  const GridPtr& grid_ptr() const { return grid_; }

  std::size_t generation() const { return generation_; }
  void set_generation(std::size_t g) { generation_ = g; }

 private:
  GridPtr grid_;
  std::vector<std::size_t> members_;
  std::vector<std::uint8_t> mask_;
  std::size_t generation_ = 0;
};

struct PatchConfig {
  // Boundary-band half-width in value units; 0 selects the default
  // 3 * max_spacing * (max one-sided difference of the input field).
  double zeta = 0.0;
  // Halo radius for re-activating stencil neighbors; 0 selects the stencil
  // order. Must be >= the stencil order when set explicitly.
  std::size_t pad_radius = 0;
  // A cell is value-decreasing when its decrease rate exceeds this; 0
  // selects the convergence tol so patch and global share one fixed-point
  // notion.
  double decrease_tol = 0.0;
  std::size_t max_iterations = 50'000;
};

struct ResolvedPatchConfig {
  double zeta = 0.0;
  std::size_t pad_radius = 1;
  double decrease_tol = 0.0;
  std::size_t max_iterations = 0;
};

// Largest first-order one-sided difference magnitude over all axes; the
// Lipschitz estimate behind the default band width.
double estimate_lipschitz(const ScalarField& f);

ResolvedPatchConfig resolve_patch_config(const PatchConfig& cfg,
                                         const ScalarField& h,
                                         const NumericsConfig& ncfg,
                                         const ConvergenceConfig& conv);

// Band minus certified cells: {|h| <= zeta} \ certified. The mask uses one
// byte per cell, nonzero = certified; empty mask = nothing certified.
ActiveSet init_active_set(const ScalarField& h,
                          std::span<const std::uint8_t> certified,
                          const ResolvedPatchConfig& cfg);

struct PatchIterationResult {
  ActiveSet next;
  std::size_t evals = 0;
  std::size_t cells_written = 0;
  // Largest decrease rate over the active cells, before gating.
  double max_rate = 0.0;
  double step = 0.0;
};

// One active-set sweep, in place: Jacobi update of exactly Q's members
// (stencil reads see the pre-sweep field), then the next set is the written
// cells plus their pad halo, clipped to the band |V'| <= zeta.
PatchIterationResult patch_iteration_inplace(ScalarField& V,
                                             const ActiveSet& Q,
                                             const LevelSetKernel& kernel,
                                             const ResolvedPatchConfig& cfg,
                                             unsigned threads = 1);

// Pure contract form; Q must be nonempty (EmptyBatch otherwise).
std::tuple<ScalarField, ActiveSet, std::size_t> patch_iteration(
    const ScalarField& V, const ActiveSet& Q, const ControlAffineDynamics& d,
    const PatchConfig& cfg, const NumericsConfig& ncfg,
    const ConvergenceConfig& conv);

struct PatchResult {
  ScalarField field;
  SolveStats stats;
  ResolvedPatchConfig resolved;
};

// Full march: seed the band, iterate until the active set empties (converged)
// or max_iterations (flagged through stats.converged). hamiltonian_evals
// accumulates the active-set sizes.
PatchResult patch(const ScalarField& h, std::span<const std::uint8_t> certified,
                  const ControlAffineDynamics& d, const PatchConfig& cfg,
                  const NumericsConfig& ncfg, const ConvergenceConfig& conv,
                  unsigned threads = 1);

struct CertificateReport {
  std::size_t boundary_cells = 0;
  struct Violation {
    std::size_t flat;
    double hamiltonian;
  };
  std::vector<Violation> violations;
  bool certified() const { return violations.empty(); }
};

// Checks H >= -tol at every boundary cell: |V| <= zeta and the sign of V
// flips somewhere in the one-axis stencil neighborhood of radius p. Cells
// outside the band are exactly those the march never tracks, so they are
// not part of the certified boundary.
CertificateReport invariance_certificate(const ScalarField& V,
                                         const ControlAffineDynamics& d,
                                         double zeta,
                                         const NumericsConfig& ncfg,
                                         double tol);

}  // namespace hjpatch
