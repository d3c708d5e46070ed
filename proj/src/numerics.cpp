#include "hjpatch/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hjpatch {

void NumericsConfig::validate() const {
  if (stencil_order != 1 && stencil_order != 2)
    throw ConfigError("numerics: stencil_order must be 1 or 2");
  if (!(cfl_factor > 0.0) || cfl_factor > 1.0)
    throw ConfigError("numerics: cfl_factor must lie in (0, 1]");
  if (!(max_step > 0.0))
    throw ConfigError("numerics: max_step must be positive");
}

namespace {

// One-sided pair along a single axis. Face nodes take the interior
// difference for the missing side; with p=2 the near-face nodes degrade to
// the first-order interior difference, which is what linear ghost
// extrapolation yields.
inline void upwind_axis(std::span<const double> v, std::size_t flat,
                        std::size_t i, std::size_t count, std::size_t stride,
                        double inv_h, std::size_t order, double& gm,
                        double& gp) {
  if (order == 1) {
    const double left = i > 0 ? (v[flat] - v[flat - stride]) * inv_h : 0.0;
    const double right =
        i + 1 < count ? (v[flat + stride] - v[flat]) * inv_h : 0.0;
    gm = i > 0 ? left : right;
    gp = i + 1 < count ? right : left;
    return;
  }
  if (i >= 2) {
    gm = (3.0 * v[flat] - 4.0 * v[flat - stride] + v[flat - 2 * stride]) *
         (0.5 * inv_h);
  } else {
    gm = (v[flat + stride] - v[flat]) * inv_h;
    if (i == 1) gm = (v[flat] - v[flat - stride]) * inv_h;
  }
  if (i + 2 < count) {
    gp = (-3.0 * v[flat] + 4.0 * v[flat + stride] - v[flat + 2 * stride]) *
         (0.5 * inv_h);
  } else {
    gp = (v[flat] - v[flat - stride]) * inv_h;
    if (i + 1 < count) gp = (v[flat + stride] - v[flat]) * inv_h;
  }
}

}  // namespace

void upwind_gradients(const ScalarField& f, std::span<const std::size_t> idx,
                      const NumericsConfig& cfg, std::span<double> grad_minus,
                      std::span<double> grad_plus) {
  cfg.validate();
  const Grid& g = f.grid();
  if (!g.in_range(idx))
    throw IndexOutOfRange("upwind_gradients: index outside grid");
  if (grad_minus.size() != g.dims() || grad_plus.size() != g.dims())
    throw DimensionMismatch("upwind_gradients: output size mismatch");
  const std::size_t flat = g.flatten(idx);
  std::span<const double> v = f.values();
  for (std::size_t d = 0; d < g.dims(); ++d) {
    upwind_axis(v, flat, idx[d], g.shape()[d], g.strides()[d],
                1.0 / g.spacing()[d], cfg.stencil_order, grad_minus[d],
                grad_plus[d]);
  }
}

void local_speed_bound(const ControlAffineDynamics& d,
                       std::span<const double> x, std::span<double> alpha) {
  const std::size_t n = d.state_dim();
  const std::size_t m = d.input_dim();
  if (x.size() != n || alpha.size() != n)
    throw DimensionMismatch("local_speed_bound: size mismatch");
  double f[kMaxDims];
  d.drift(x, std::span<double>(f, n));
  double g[kMaxDims * kMaxInputs];
  if (m > 0) d.input_matrix(x, std::span<double>(g, n * m));
  for (std::size_t i = 0; i < n; ++i) {
    double lo_sum = 0.0, hi_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double a = g[i * m + j] * d.u_lo()[j];
      const double b = g[i * m + j] * d.u_hi()[j];
      lo_sum += std::min(a, b);
      hi_sum += std::max(a, b);
    }
    alpha[i] = std::max(std::abs(f[i] + lo_sum), std::abs(f[i] + hi_sum));
  }
}

std::vector<double> dissipation_bounds(const ControlAffineDynamics& d,
                                       const Grid& g) {
  if (d.state_dim() != g.dims())
    throw DimensionMismatch("dissipation_bounds: dynamics/grid dims differ");
  const std::size_t n = g.dims();
  std::vector<double> bound(n, 0.0);
  std::vector<double> x(n), alpha(n);
  MultiIndex idx(n, 0);
  do {
    g.state_of(idx, x);
    local_speed_bound(d, x, alpha);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(alpha[i]))
        throw NonFiniteValue("dissipation_bounds: non-finite speed bound");
      bound[i] = std::max(bound[i], alpha[i]);
    }
  } while (g.advance(idx));
  return bound;
}

namespace {

// Candidate controls for the exact upwind max: box vertices, switching-line
// crossings of box edges, and pairwise switching intersections. Bounded by
// 4 + 2n + n(n-1)/2 for m=2.
inline constexpr std::size_t kMaxCandidates =
    4 + 2 * kMaxDims + kMaxDims * (kMaxDims - 1) / 2;

// Evaluates sum_i f_i * (f_i >= 0 ? gp_i : gm_i) at one control.
inline double upwind_value(std::size_t n, std::size_t m, const double* a,
                           const double* B, const double* u,
                           std::span<const double> gm,
                           std::span<const double> gp) {
  double h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = a[i];
    for (std::size_t j = 0; j < m; ++j) s += B[i * m + j] * u[j];
    h += s * (s >= 0.0 ? gp[i] : gm[i]);
  }
  return h;
}

double upwind_max(const ControlAffineDynamics& d, std::size_t n, std::size_t m,
                  const double* a, const double* B, std::span<const double> gm,
                  std::span<const double> gp) {
  if (m == 0) return upwind_value(n, 0, a, nullptr, nullptr, gm, gp);
  if (m > 2)
    throw ConfigError("upwind_hamiltonian: input_dim > 2 not supported");
  double cand[kMaxCandidates * 2];
  std::size_t ncand = 0;
  const double* lo = d.u_lo().data();
  const double* hi = d.u_hi().data();
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    for (std::size_t j = 0; j < m; ++j)
      cand[ncand * 2 + j] = (mask >> j) & 1 ? hi[j] : lo[j];
    ++ncand;
  }
  if (m == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      const double b = B[i];
      if (b == 0.0) continue;
      const double u0 = -a[i] / b;
      if (u0 > lo[0] && u0 < hi[0]) cand[2 * ncand++] = u0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      // clip the line a_i + B_i . u = 0 to the box, parametrized along the
      // axis with the smaller coefficient for stability
      const double b0 = B[i * 2], b1 = B[i * 2 + 1];
      const std::size_t p = std::abs(b1) >= std::abs(b0) ? 1 : 0;
      const std::size_t q = 1 - p;
      const double bp = p ? b1 : b0;
      if (bp == 0.0) continue;
      const double c0 = -a[i] / bp;
      const double c1 = -(p ? b0 : b1) / bp;
      double t0 = lo[q], t1 = hi[q];
      if (c1 == 0.0) {
        if (c0 < lo[p] || c0 > hi[p]) continue;
      } else {
        const double ta = (lo[p] - c0) / c1;
        const double tb = (hi[p] - c0) / c1;
        t0 = std::max(t0, std::min(ta, tb));
        t1 = std::min(t1, std::max(ta, tb));
        if (t0 > t1) continue;
      }
      cand[ncand * 2 + q] = t0;
      cand[ncand * 2 + p] = c0 + c1 * t0;
      ++ncand;
      cand[ncand * 2 + q] = t1;
      cand[ncand * 2 + p] = c0 + c1 * t1;
      ++ncand;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double det = B[i * 2] * B[j * 2 + 1] - B[i * 2 + 1] * B[j * 2];
        if (det == 0.0) continue;
        const double u0 = (-a[i] * B[j * 2 + 1] + a[j] * B[i * 2 + 1]) / det;
        const double u1 = (-a[j] * B[i * 2] + a[i] * B[j * 2]) / det;
        if (u0 < lo[0] || u0 > hi[0] || u1 < lo[1] || u1 > hi[1]) continue;
        cand[ncand * 2] = u0;
        cand[ncand * 2 + 1] = u1;
        ++ncand;
      }
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < ncand; ++k)
    best = std::max(best, upwind_value(n, m, a, B, cand + k * 2, gm, gp));
  return best;
}

}  // namespace

double upwind_hamiltonian(const ControlAffineDynamics& d,
                          std::span<const double> x,
                          std::span<const double> grad_minus,
                          std::span<const double> grad_plus) {
  const std::size_t n = d.state_dim();
  const std::size_t m = d.input_dim();
  double a[kMaxDims];
  d.drift(x, std::span<double>(a, n));
  double B[kMaxDims * kMaxInputs];
  if (m > 0) d.input_matrix(x, std::span<double>(B, n * m));
  return upwind_max(d, n, m, a, B, grad_minus, grad_plus);
}

HamiltonianResult numerical_hamiltonian(const ControlAffineDynamics& d,
                                        std::span<const double> x,
                                        std::span<const double> grad_minus,
                                        std::span<const double> grad_plus,
                                        const NumericsConfig& cfg,
                                        std::span<const double> global_alphas) {
  cfg.validate();
  const std::size_t n = d.state_dim();
  if (x.size() != n || grad_minus.size() != n || grad_plus.size() != n)
    throw DimensionMismatch("numerical_hamiltonian: size mismatch");
  HamiltonianResult res;
  res.alphas.resize(n);
  if (cfg.dissipation_mode == DissipationMode::Local) {
    local_speed_bound(d, x, res.alphas);
  } else {
    if (global_alphas.size() != n)
      throw ConfigError(
          "numerical_hamiltonian: global-bound mode needs precomputed "
          "dissipation_bounds");
    for (std::size_t i = 0; i < n; ++i) res.alphas[i] = global_alphas[i];
  }
  res.value = upwind_hamiltonian(d, x, grad_minus, grad_plus);
  return res;
}

double cfl_timestep(std::span<const double> alphas, const Grid& g,
                    const NumericsConfig& cfg) {
  cfg.validate();
  if (alphas.size() != g.dims())
    throw DimensionMismatch("cfl_timestep: alpha size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < g.dims(); ++i) {
    if (alphas[i] < 0.0)
      throw ConfigError("cfl_timestep: negative speed bound");
    sum += alphas[i] / g.spacing()[i];
  }
  if (sum == 0.0) return cfg.max_step;
  return std::min(cfg.cfl_factor / sum, cfg.max_step);
}

LevelSetKernel::LevelSetKernel(const ControlAffineDynamics& d, GridPtr grid,
                               NumericsConfig cfg)
    : dyn_(d), grid_(std::move(grid)), cfg_(cfg) {
  cfg_.validate();
  if (d.state_dim() != grid_->dims())
    throw DimensionMismatch("kernel: dynamics/grid dims differ");
  if (d.input_dim() > 2)
    throw ConfigError("kernel: input_dim > 2 not supported");
  alphas_ = dissipation_bounds(d, *grid_);
  dt_ = cfl_timestep(alphas_, *grid_, cfg_);
  std::size_t total = 0;
  for (std::size_t d2 = 0; d2 < grid_->dims(); ++d2) {
    coord_offset_[d2] = total;
    total += grid_->shape()[d2];
  }
  coords_.resize(total);
  for (std::size_t d2 = 0; d2 < grid_->dims(); ++d2) {
    for (std::size_t i = 0; i < grid_->shape()[d2]; ++i) {
      coords_[coord_offset_[d2] + i] =
          grid_->lo()[d2] + static_cast<double>(i) * grid_->spacing()[d2];
    }
  }
}

double LevelSetKernel::hamiltonian(std::span<const double> values,
                                   std::span<const std::size_t> idx,
                                   std::size_t flat) const {
  const Grid& g = *grid_;
  const std::size_t n = g.dims();
  const std::size_t m = dyn_.input_dim();
  double gm[kMaxDims], gp[kMaxDims], x[kMaxDims];
  for (std::size_t d = 0; d < n; ++d) {
    x[d] = coords_[coord_offset_[d] + idx[d]];
    upwind_axis(values, flat, idx[d], g.shape()[d], g.strides()[d],
                1.0 / g.spacing()[d], cfg_.stencil_order, gm[d], gp[d]);
  }
  double a[kMaxDims];
  dyn_.drift(std::span<const double>(x, n), std::span<double>(a, n));
  double B[kMaxDims * kMaxInputs];
  if (m > 0)
    dyn_.input_matrix(std::span<const double>(x, n),
                      std::span<double>(B, n * m));
  return upwind_max(dyn_, n, m, a, B, std::span<const double>(gm, n),
                    std::span<const double>(gp, n));
}

}  // namespace hjpatch
