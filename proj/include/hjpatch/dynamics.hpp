#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hjpatch/errors.hpp"
#include "hjpatch/grid.hpp"

namespace hjpatch {

inline constexpr std::size_t kMaxInputs = 4;

// Control-affine system  xdot = drift(x) + G(x) u  with box input bounds.
// Immutable after construction; evaluation is safe from any thread.
class ControlAffineDynamics {
 public:
  // drift writes n values; input_matrix writes n*m values row-major.
  using DriftFn = std::function<void(std::span<const double>, std::span<double>)>;
  using InputMatrixFn =
      std::function<void(std::span<const double>, std::span<double>)>;

  ControlAffineDynamics(std::size_t state_dim, std::size_t input_dim,
                        DriftFn drift, InputMatrixFn input_matrix,
                        std::vector<double> u_lo, std::vector<double> u_hi);

  std::size_t state_dim() const { return n_; }
  std::size_t input_dim() const { return m_; }
  const std::vector<double>& u_lo() const { return u_lo_; }
  const std::vector<double>& u_hi() const { return u_hi_; }

  void drift(std::span<const double> x, std::span<double> out) const {
    drift_(x, out);
  }
  void input_matrix(std::span<const double> x, std::span<double> out) const {
    input_matrix_(x, out);
  }

  // drift(x) + G(x) u. Throws InputOutOfBounds if u leaves the box.
  void flow(std::span<const double> x, std::span<const double> u,
            std::span<double> out) const;
  std::vector<double> flow(std::span<const double> x,
                           std::span<const double> u) const;

  // Samples drift and G at `count` uniform points in [lo, hi] and throws
  // NonFiniteValue on the first non-finite entry.
  void audit_finite(std::span<const double> lo, std::span<const double> hi,
                    std::size_t count, std::uint64_t seed) const;

 private:
  std::size_t n_, m_;
  DriftFn drift_;
  InputMatrixFn input_matrix_;
  std::vector<double> u_lo_, u_hi_;
};

// Bang-bang maximizer of <grad, drift + G u> over the input box: each input
// sits at its upper bound when (G^T grad)_i >= 0, at the lower bound
// otherwise. Ties go to the upper bound.
std::vector<double> optimal_control(const ControlAffineDynamics& d,
                                    std::span<const double> x,
                                    std::span<const double> grad);

// In-place variant for hot loops; G is the already-evaluated n x m matrix.
void optimal_control_from_matrix(std::span<const double> input_matrix,
                                 std::size_t n, std::size_t m,
                                 std::span<const double> grad,
                                 std::span<const double> u_lo,
                                 std::span<const double> u_hi,
                                 std::span<double> u_out);

class Policy {
 public:
  // u = clip(u_ref - K (x - x_ref)).
  static Policy linear_feedback(std::vector<double> gain_rowmajor,
                                std::vector<double> x_ref,
                                std::vector<double> u_ref);
  static Policy constant(std::vector<double> u);
  // One field per input channel, interpolated on the shared grid.
  static Policy tabulated(std::vector<ScalarField> tables);

  // Output is always clipped to the dynamics' input box.
  std::vector<double> evaluate(const ControlAffineDynamics& d,
                               std::span<const double> x) const;

  enum class Kind { LinearFeedback, Constant, Tabulated };
  Kind kind() const { return kind_; }

 private:
  explicit Policy(Kind kind) : kind_(kind) {}
  Kind kind_;
  std::vector<double> gain_, x_ref_, u_ref_;
  std::vector<ScalarField> tables_;
};

// Zero-input dynamics whose drift is drift(x) + G(x) pi(x). The policy is
// evaluated per state; the Hamiltonian on the result reduces to the Lie
// derivative along the closed loop.
ControlAffineDynamics closed_loop(const ControlAffineDynamics& d, Policy p);

}  // namespace hjpatch
