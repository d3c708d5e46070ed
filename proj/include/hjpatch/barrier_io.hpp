#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hjpatch/numerics.hpp"

namespace hjpatch {

inline constexpr std::uint32_t kFieldFileVersion = 1;

using Metadata = std::map<std::string, std::string>;

// Binary field container, little-endian throughout:
//   "HJPF" | version u32 | payload_kind u32 | dims u32 |
//   lo f64[dims] | hi f64[dims] | shape u64[dims] |
//   metadata_count u32 | {key_len u32, key, value_len u32, value}... |
//   payload (f64[cells] for kind 0, u8[cells] for kind 1)
// Doubles are moved as raw IEEE-754 bit patterns, so round trips are
// bit-exact. Load errors name the byte offset of the defect.
void save_field(const ScalarField& f, const std::string& path,
                const Metadata& metadata = {});
ScalarField load_field(const std::string& path, Metadata* metadata = nullptr);

void save_mask(const GridPtr& grid, std::span<const std::uint8_t> mask,
               const std::string& path, const Metadata& metadata = {});
std::pair<GridPtr, std::vector<std::uint8_t>> load_mask(
    const std::string& path, Metadata* metadata = nullptr);

enum class PerturbationKind { RadialBump, AdditiveConstant, BandNoise };
enum class PerturbationSign { Optimistic, Pessimistic };

struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::RadialBump;
  // Bump center for radial-bump; ignored by the other kinds.
  std::vector<double> center;
  double radius = 0.0;
  double amplitude = 0.0;
  PerturbationSign sign = PerturbationSign::Optimistic;
  std::uint64_t seed = 0;
};

// truth plus a smooth perturbation. Optimistic sign adds a nonnegative
// profile, so the result dominates truth pointwise. radial-bump uses the
// compact quartic amp * (1 - (r/radius)^2)^2; band-noise scatters eight such
// bumps at seeded boundary cells of truth.
ScalarField synth_almost_barrier(const ScalarField& truth,
                                 const PerturbationSpec& spec);

struct EpsilonReport {
  // Violating share of the 0-boundary, in [0, 1].
  double epsilon = 0.0;
  std::size_t boundary_cells = 0;
  std::vector<std::size_t> violating_cells;
  // No boundary cells at all (empty or full safe set).
  bool vacuous = false;
};

// Leakiness of the claimed safe set {h >= 0}: the share of its inner rim
// (h >= 0 with a negative axis neighbor) where max_u L_f h + gamma h falls
// below -tol.
EpsilonReport measure_epsilon(const ScalarField& h,
                              const ControlAffineDynamics& d, double gamma,
                              const NumericsConfig& ncfg, double tol);

struct SdfResult {
  ScalarField field;
  // No zero crossing anywhere: input returned unchanged.
  bool vacuous = false;
};

// Replaces each value by the signed Euclidean distance to the piecewise
// linear zero-crossing set, keeping the sign pattern. 2-D distances go to
// marching-squares segments; other dimensions use the zero crossings along
// grid edges. Exhaustive scan, intended for desk-scale grids.
SdfResult signed_distance_reconstruct(const ScalarField& f);

}  // namespace hjpatch
