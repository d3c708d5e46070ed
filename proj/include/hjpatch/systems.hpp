#pragma once

#include <string>
#include <vector>

#include "hjpatch/dynamics.hpp"
#include "hjpatch/grid.hpp"

namespace hjpatch {

// Axis-aligned state constraint box; axes without limits use +-infinity.
struct ConstraintBox {
  std::vector<double> lo, hi;

  // Signed margin: min over constrained axes of distance to the nearest
  // violated face, positive inside.
  double margin(std::span<const double> x) const;
};

struct BenchmarkSystem {
  std::string name;
  ControlAffineDynamics dynamics;
  ConstraintBox constraint;
  std::vector<double> grid_lo, grid_hi;
  std::vector<std::size_t> default_shape;
};

// h0(node) = constraint.margin(node). Used both as the terminal value for
// the solver and as the almost-barrier seed.
ScalarField constraint_field(const GridPtr& g, const ConstraintBox& box);

// xdot = v, vdot = u, |u| <= u_max; position constrained to [-1, 1].
BenchmarkSystem double_integrator(double u_max = 1.0);

// Planar vertical quadrotor, state (z, vz, theta, omega), inputs
// (thrust in [0, 2 m g], moment in [-1, 1]); m = 1, g = 9.81, I = 0.1.
BenchmarkSystem quad4d();

// Planar quadrotor, state (px, pz, vx, vz, theta, omega), per-rotor thrusts
// in [0, m g] each, arm 0.25, I = 0.1.
BenchmarkSystem planar_quad6d();

BenchmarkSystem benchmark_by_name(const std::string& name);

}  // namespace hjpatch
