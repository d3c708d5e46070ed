#pragma once

#include <cstddef>
#include <vector>

#include "hjpatch/dynamics.hpp"

namespace hjpatch {

struct LqrResult {
  // Gain K (m x n row-major) and cost matrix P (n x n row-major) with
  // u = u_ref - K (x - x_ref).
  std::vector<double> gain;
  std::vector<double> cost;
  // Residual of A^T P + P A - P B R^-1 B^T P + Q, max-abs entry.
  double residual = 0.0;
};

// Solves the continuous algebraic Riccati equation by integrating the
// Riccati flow to its fixed point. A is n x n, B is n x m, Q is n x n PSD,
// R is m x m PD, all row-major. Throws NonConvergence if the flow has not
// settled within the iteration budget.
LqrResult solve_lqr(std::size_t n, std::size_t m, std::span<const double> A,
                    std::span<const double> B, std::span<const double> Q,
                    std::span<const double> R);

// Central-difference linearization of the closed control-affine system at
// (x_ref, u_ref): A = d(drift + G u)/dx, B = G(x_ref).
void linearize(const ControlAffineDynamics& d, std::span<const double> x_ref,
               std::span<const double> u_ref, std::span<double> A,
               std::span<double> B, double step = 1e-6);

// LQR policy around an equilibrium; u_ref must hold x_ref stationary to
// within `drift_tol`, checked before solving.
Policy lqr_policy(const ControlAffineDynamics& d, std::vector<double> x_ref,
                  std::vector<double> u_ref, std::span<const double> Q,
                  std::span<const double> R, double drift_tol = 1e-6);

}  // namespace hjpatch
