#include "hjpatch/dynamics.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "hjpatch/rng.hpp"

namespace hjpatch {

ControlAffineDynamics::ControlAffineDynamics(
    std::size_t state_dim, std::size_t input_dim, DriftFn drift,
    InputMatrixFn input_matrix, std::vector<double> u_lo,
    std::vector<double> u_hi)
    : n_(state_dim),
      m_(input_dim),
      drift_(std::move(drift)),
      input_matrix_(std::move(input_matrix)),
      u_lo_(std::move(u_lo)),
      u_hi_(std::move(u_hi)) {
  if (n_ == 0) throw DimensionMismatch("dynamics: state_dim must be positive");
  if (n_ > kMaxDims)
    throw CapacityExceeded("dynamics: state_dim " + std::to_string(n_) +
                           " exceeds limit " + std::to_string(kMaxDims));
  if (m_ > kMaxInputs)
    throw CapacityExceeded("dynamics: input_dim " + std::to_string(m_) +
                           " exceeds limit " + std::to_string(kMaxInputs));
  if (u_lo_.size() != m_ || u_hi_.size() != m_)
    throw DimensionMismatch("dynamics: input bounds must have input_dim entries");
  for (std::size_t i = 0; i < m_; ++i) {
    if (!(u_lo_[i] <= u_hi_[i]))
      throw DimensionMismatch("dynamics: u_lo[" + std::to_string(i) +
                              "] exceeds u_hi[" + std::to_string(i) + "]");
  }
  if (!drift_) throw ConfigError("dynamics: drift callback is empty");
  if (m_ > 0 && !input_matrix_)
    throw ConfigError("dynamics: input_matrix callback is empty");
}

void ControlAffineDynamics::flow(std::span<const double> x,
                                 std::span<const double> u,
                                 std::span<double> out) const {
  if (x.size() != n_ || out.size() != n_)
    throw DimensionMismatch("flow: state size mismatch");
  if (u.size() != m_)
    throw DimensionMismatch("flow: input size mismatch");
  constexpr double kBoundSlack = 1e-12;
  for (std::size_t i = 0; i < m_; ++i) {
    const double span = u_hi_[i] - u_lo_[i];
    const double slack = kBoundSlack * (1.0 + std::abs(u_lo_[i]) +
                                        std::abs(u_hi_[i]) + span);
    if (u[i] < u_lo_[i] - slack || u[i] > u_hi_[i] + slack)
      throw InputOutOfBounds("flow: input " + std::to_string(i) + " = " +
                             std::to_string(u[i]) + " outside [" +
                             std::to_string(u_lo_[i]) + ", " +
                             std::to_string(u_hi_[i]) + "]");
  }
  drift_(x, out);
  if (m_ == 0) return;
  double g[kMaxDims * kMaxInputs];
  input_matrix_(x, std::span<double>(g, n_ * m_));
  for (std::size_t i = 0; i < n_; ++i) {
    double acc = out[i];
    for (std::size_t j = 0; j < m_; ++j) acc += g[i * m_ + j] * u[j];
    out[i] = acc;
  }
}

std::vector<double> ControlAffineDynamics::flow(
    std::span<const double> x, std::span<const double> u) const {
  std::vector<double> out(n_);
  flow(x, u, out);
  return out;
}

void ControlAffineDynamics::audit_finite(std::span<const double> lo,
                                         std::span<const double> hi,
                                         std::size_t count,
                                         std::uint64_t seed) const {
  if (lo.size() != n_ || hi.size() != n_)
    throw DimensionMismatch("audit_finite: bounds size mismatch");
  Rng rng(seed);
  std::vector<double> x(n_), f(n_), g(n_ * m_);
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t i = 0; i < n_; ++i) x[i] = rng.uniform(lo[i], hi[i]);
    drift_(x, f);
    for (std::size_t i = 0; i < n_; ++i) {
      if (!std::isfinite(f[i]))
        throw NonFiniteValue("audit_finite: drift component " +
                             std::to_string(i) + " non-finite at sample " +
                             std::to_string(s));
    }
    if (m_ == 0) continue;
    input_matrix_(x, g);
    for (std::size_t i = 0; i < n_ * m_; ++i) {
      if (!std::isfinite(g[i]))
        throw NonFiniteValue("audit_finite: input matrix entry " +
                             std::to_string(i) + " non-finite at sample " +
                             std::to_string(s));
    }
  }
}

void optimal_control_from_matrix(std::span<const double> input_matrix,
                                 std::size_t n, std::size_t m,
                                 std::span<const double> grad,
                                 std::span<const double> u_lo,
                                 std::span<const double> u_hi,
                                 std::span<double> u_out) {
  for (std::size_t j = 0; j < m; ++j) {
    double proj = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      proj += input_matrix[i * m + j] * grad[i];
    u_out[j] = proj >= 0.0 ? u_hi[j] : u_lo[j];
  }
}

std::vector<double> optimal_control(const ControlAffineDynamics& d,
                                    std::span<const double> x,
                                    std::span<const double> grad) {
  if (x.size() != d.state_dim() || grad.size() != d.state_dim())
    throw DimensionMismatch("optimal_control: size mismatch");
  std::vector<double> u(d.input_dim());
  if (d.input_dim() == 0) return u;
  double g[kMaxDims * kMaxInputs];
  d.input_matrix(x, std::span<double>(g, d.state_dim() * d.input_dim()));
  optimal_control_from_matrix(std::span<const double>(g, d.state_dim() * d.input_dim()),
                              d.state_dim(), d.input_dim(), grad, d.u_lo(),
                              d.u_hi(), u);
  return u;
}

Policy Policy::linear_feedback(std::vector<double> gain_rowmajor,
                               std::vector<double> x_ref,
                               std::vector<double> u_ref) {
  if (x_ref.empty() || u_ref.empty())
    throw DimensionMismatch("policy: empty reference");
  if (gain_rowmajor.size() != x_ref.size() * u_ref.size())
    throw DimensionMismatch("policy: gain shape mismatch");
  Policy p(Kind::LinearFeedback);
  p.gain_ = std::move(gain_rowmajor);
  p.x_ref_ = std::move(x_ref);
  p.u_ref_ = std::move(u_ref);
  return p;
}

Policy Policy::constant(std::vector<double> u) {
  Policy p(Kind::Constant);
  p.u_ref_ = std::move(u);
  return p;
}

Policy Policy::tabulated(std::vector<ScalarField> tables) {
  if (tables.empty()) throw DimensionMismatch("policy: no tables");
  for (std::size_t j = 1; j < tables.size(); ++j) {
    if (!(tables[j].grid() == tables[0].grid()))
      throw ShapeMismatch("policy: tables must share one grid");
  }
  Policy p(Kind::Tabulated);
  p.tables_ = std::move(tables);
  return p;
}

std::vector<double> Policy::evaluate(const ControlAffineDynamics& d,
                                     std::span<const double> x) const {
  const std::size_t m = d.input_dim();
  std::vector<double> u(m, 0.0);
  switch (kind_) {
    case Kind::LinearFeedback: {
      if (x_ref_.size() != d.state_dim() || u_ref_.size() != m)
        throw DimensionMismatch("policy: reference size mismatch");
      for (std::size_t j = 0; j < m; ++j) {
        double acc = u_ref_[j];
        for (std::size_t i = 0; i < x_ref_.size(); ++i)
          acc -= gain_[j * x_ref_.size() + i] * (x[i] - x_ref_[i]);
        u[j] = acc;
      }
      break;
    }
    case Kind::Constant: {
      if (u_ref_.size() != m)
        throw DimensionMismatch("policy: constant input size mismatch");
      u = u_ref_;
      break;
    }
    case Kind::Tabulated: {
      if (tables_.size() != m)
        throw DimensionMismatch("policy: table count mismatch");
      for (std::size_t j = 0; j < m; ++j)
        u[j] = interpolate_clamped(tables_[j], x).value;
      break;
    }
  }
  for (std::size_t j = 0; j < m; ++j)
    u[j] = std::min(std::max(u[j], d.u_lo()[j]), d.u_hi()[j]);
  return u;
}

ControlAffineDynamics closed_loop(const ControlAffineDynamics& d, Policy p) {
  const std::size_t n = d.state_dim();
  const std::size_t m = d.input_dim();
  auto drift = [d, p, n, m](std::span<const double> x, std::span<double> out) {
    d.drift(x, out);
    if (m == 0) return;
    const std::vector<double> u = p.evaluate(d, x);
    double g[kMaxDims * kMaxInputs];
    d.input_matrix(x, std::span<double>(g, n * m));
    for (std::size_t i = 0; i < n; ++i) {
      double acc = out[i];
      for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * u[j];
      out[i] = acc;
    }
  };
  return ControlAffineDynamics(n, 0, std::move(drift), nullptr, {}, {});
}

}  // namespace hjpatch
