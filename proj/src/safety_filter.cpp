#include "hjpatch/safety_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hjpatch/rng.hpp"

namespace hjpatch {

void FilterConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("filter: gamma must be positive");
  for (double r : r_diag) {
    if (!(r > 0.0))
      throw ConfigError("filter: R diagonal entries must be positive");
  }
  if (relaxation_weight < 0.0)
    throw ConfigError("filter: relaxation weight must be nonnegative");
}

namespace {

// Smallest lambda >= 0 with a.clip(u_nom + lambda a / (2R)) == b, found by
// scanning the kinks where a coordinate saturates. Assumes feasibility was
// established (a.u_bang >= b).
void solve_active_projection(std::span<const double> a, double b,
                             std::span<const double> u_nom,
                             std::span<const double> r,
                             std::span<const double> lo,
                             std::span<const double> hi,
                             std::span<double> u_out) {
  const std::size_t m = a.size();
  auto u_at = [&](double lambda, std::span<double> u) {
    for (std::size_t j = 0; j < m; ++j) {
      u[j] = std::clamp(u_nom[j] + lambda * a[j] / (2.0 * r[j]), lo[j], hi[j]);
    }
  };
  auto phi = [&](double lambda) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      s += a[j] *
           std::clamp(u_nom[j] + lambda * a[j] / (2.0 * r[j]), lo[j], hi[j]);
    }
    return s;
  };
  std::vector<double> kinks{0.0};
  for (std::size_t j = 0; j < m; ++j) {
    if (a[j] == 0.0) continue;
    const double k1 = 2.0 * r[j] * (lo[j] - u_nom[j]) / a[j];
    const double k2 = 2.0 * r[j] * (hi[j] - u_nom[j]) / a[j];
    if (k1 > 0.0) kinks.push_back(k1);
    if (k2 > 0.0) kinks.push_back(k2);
  }
  std::sort(kinks.begin(), kinks.end());
  double prev = 0.0;
  double phi_prev = phi(0.0);
  for (std::size_t k = 1; k <= kinks.size(); ++k) {
    double cur;
    double phi_cur;
    if (k < kinks.size()) {
      cur = kinks[k];
      phi_cur = phi(cur);
    } else {
      // Past the last kink phi is constant at the bang-bang value.
      cur = kinks.back() + 1.0;
      phi_cur = phi(cur);
    }
    if (phi_cur >= b) {
      // phi is linear on [prev, cur]; interpolate the exact multiplier.
      double lambda = cur;
      if (phi_cur > phi_prev) {
        const double t = (b - phi_prev) / (phi_cur - phi_prev);
        lambda = prev + std::clamp(t, 0.0, 1.0) * (cur - prev);
      }
      u_at(lambda, u_out);
      return;
    }
    prev = cur;
    phi_prev = phi_cur;
  }
  // Feasibility margin exhausted by rounding; settle on the extreme vertex.
  for (std::size_t j = 0; j < m; ++j) u_out[j] = a[j] >= 0.0 ? hi[j] : lo[j];
}

void gauss_solve(std::vector<double>& mat, std::vector<double>& rhs,
                 std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t rr = col + 1; rr < n; ++rr) {
      if (std::abs(mat[rr * n + col]) > std::abs(mat[pivot * n + col]))
        pivot = rr;
    }
    if (std::abs(mat[pivot * n + col]) < 1e-300) {
      rhs.assign(n, std::numeric_limits<double>::quiet_NaN());
      return;
    }
    if (pivot != col) {
      for (std::size_t cc = 0; cc < n; ++cc)
        std::swap(mat[pivot * n + cc], mat[col * n + cc]);
      std::swap(rhs[pivot], rhs[col]);
    }
    const double inv = 1.0 / mat[col * n + col];
    for (std::size_t rr = 0; rr < n; ++rr) {
      if (rr == col) continue;
      const double f = mat[rr * n + col] * inv;
      if (f == 0.0) continue;
      for (std::size_t cc = col; cc < n; ++cc)
        mat[rr * n + cc] -= f * mat[col * n + cc];
      rhs[rr] -= f * rhs[col];
    }
    mat[col * n + col] = 1.0;
    for (std::size_t cc = col + 1; cc < n; ++cc) mat[col * n + cc] *= inv;
    rhs[col] *= inv;
  }
}

// Exact minimizer of sum_j r_j (u_j - u_nom_j)^2 + w (b - a.u)^2 over the
// box, by enumerating clamp patterns (3^m) with a reduced linear solve on
// the free coordinates and a KKT sign check on the clamped ones.
std::vector<double> solve_relaxed_box_qp(std::span<const double> a, double b,
                                         std::span<const double> u_nom,
                                         std::span<const double> r,
                                         std::span<const double> lo,
                                         std::span<const double> hi,
                                         double w) {
  const std::size_t m = a.size();
  std::vector<double> best(m);
  double best_obj = std::numeric_limits<double>::infinity();
  auto objective = [&](std::span<const double> u) {
    double au = 0.0, q = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      au += a[j] * u[j];
      const double du = u[j] - u_nom[j];
      q += r[j] * du * du;
    }
    const double slack = b - au;
    return q + w * slack * slack;
  };
  std::size_t patterns = 1;
  for (std::size_t j = 0; j < m; ++j) patterns *= 3;
  std::vector<double> u(m);
  std::vector<std::size_t> free_idx;
  for (std::size_t p = 0; p < patterns; ++p) {
    std::size_t code = p;
    free_idx.clear();
    bool ok = true;
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t s = code % 3;
      code /= 3;
      if (s == 0) {
        free_idx.push_back(j);
      } else {
        u[j] = s == 1 ? lo[j] : hi[j];
      }
    }
    const std::size_t nf = free_idx.size();
    if (nf > 0) {
      // Stationarity on free coords: (diag(r) + w a a^T) u = r u_nom + w b a
      // restricted to the free block, clamped block moved to the rhs.
      std::vector<double> mat(nf * nf), rhs(nf);
      for (std::size_t ii = 0; ii < nf; ++ii) {
        const std::size_t j = free_idx[ii];
        double rv = r[j] * u_nom[j] + w * b * a[j];
        for (std::size_t jj = 0; jj < nf; ++jj) {
          const std::size_t k = free_idx[jj];
          mat[ii * nf + jj] = w * a[j] * a[k] + (j == k ? r[j] : 0.0);
        }
        for (std::size_t k = 0; k < m; ++k) {
          if (std::find(free_idx.begin(), free_idx.end(), k) ==
              free_idx.end()) {
            rv -= w * a[j] * a[k] * u[k];
          }
        }
        rhs[ii] = rv;
      }
      gauss_solve(mat, rhs, nf);
      for (std::size_t ii = 0; ii < nf; ++ii) {
        const std::size_t j = free_idx[ii];
        u[j] = rhs[ii];
        if (!std::isfinite(u[j]) || u[j] < lo[j] - 1e-12 ||
            u[j] > hi[j] + 1e-12) {
          ok = false;
          break;
        }
        u[j] = std::clamp(u[j], lo[j], hi[j]);
      }
    }
    if (!ok) continue;
    // KKT sign check at clamped coordinates.
    double au = 0.0;
    for (std::size_t j = 0; j < m; ++j) au += a[j] * u[j];
    for (std::size_t j = 0; j < m && ok; ++j) {
      if (std::find(free_idx.begin(), free_idx.end(), j) != free_idx.end())
        continue;
      const double grad = 2.0 * r[j] * (u[j] - u_nom[j]) -
                          2.0 * w * (b - au) * a[j];
      if (u[j] == lo[j] && grad < -1e-9) ok = false;
      if (u[j] == hi[j] && grad > 1e-9) ok = false;
    }
    if (!ok) continue;
    const double obj = objective(u);
    if (obj < best_obj) {
      best_obj = obj;
      best = u;
    }
  }
  return best;
}

}  // namespace

FilterDecision filter_control(const ScalarField& V,
                              const ControlAffineDynamics& d,
                              std::span<const double> x,
                              std::span<const double> u_nom,
                              const FilterConfig& cfg) {
  cfg.validate();
  const std::size_t n = d.state_dim();
  const std::size_t m = d.input_dim();
  if (x.size() != n) throw DimensionMismatch("filter: state size mismatch");
  if (u_nom.size() != m)
    throw DimensionMismatch("filter: nominal control size mismatch");
  if (!cfg.r_diag.empty() && cfg.r_diag.size() != m)
    throw DimensionMismatch("filter: R diagonal size mismatch");
  if (V.grid().dims() != n)
    throw DimensionMismatch("filter: field/state dims differ");
  for (double v : u_nom) {
    if (!std::isfinite(v))
      throw NonFiniteValue("filter: nominal control not finite");
  }

  FilterDecision out;
  out.control.resize(m);
  const ClampedSample sample = interpolate_clamped(V, x);
  const std::vector<double> grad = interpolate_gradient_clamped(V, x);
  out.clamped_state = sample.clamped;

  double drift[kMaxDims];
  d.drift(x, std::span<double>(drift, n));
  double b = -cfg.gamma * sample.value;
  for (std::size_t i = 0; i < n; ++i) b -= grad[i] * drift[i];

  std::vector<double> a(m, 0.0);
  if (m > 0) {
    double gmat[kMaxDims * kMaxInputs];
    d.input_matrix(x, std::span<double>(gmat, n * m));
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) a[j] += gmat[i * m + j] * grad[i];
    }
  }

  std::vector<double> r = cfg.r_diag;
  if (r.empty()) r.assign(m, 1.0);
  const std::vector<double>& lo = d.u_lo();
  const std::vector<double>& hi = d.u_hi();

  // Box projection of the nominal is the unconstrained box optimum for
  // diagonal R; accept it untouched whenever it satisfies the halfspace.
  double a_dot_clip = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    out.control[j] = std::clamp(u_nom[j], lo[j], hi[j]);
    a_dot_clip += a[j] * out.control[j];
  }
  if (a_dot_clip >= b) {
    out.status = FilterStatus::NominalFeasible;
    out.constraint_margin = a_dot_clip - b;
    return out;
  }

  double a_dot_max = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    a_dot_max += a[j] * (a[j] >= 0.0 ? hi[j] : lo[j]);
  if (a_dot_max < b) {
    if (cfg.relaxation_weight > 0.0) {
      out.control = solve_relaxed_box_qp(a, b, u_nom, r, lo, hi,
                                         cfg.relaxation_weight);
    } else {
      for (std::size_t j = 0; j < m; ++j)
        out.control[j] = a[j] >= 0.0 ? hi[j] : lo[j];
    }
    out.status = FilterStatus::InfeasibleClamped;
    double au = 0.0;
    for (std::size_t j = 0; j < m; ++j) au += a[j] * out.control[j];
    out.constraint_margin = au - b;
    return out;
  }

  solve_active_projection(a, b, u_nom, r, lo, hi, out.control);
  out.status = FilterStatus::Modified;
  double au = 0.0;
  for (std::size_t j = 0; j < m; ++j) au += a[j] * out.control[j];
  out.constraint_margin = au - b;
  return out;
}

namespace {

void rk4_step(const ControlAffineDynamics& d, std::span<const double> x,
              std::span<const double> u, double dt, std::span<double> out) {
  const std::size_t n = x.size();
  double k1[kMaxDims], k2[kMaxDims], k3[kMaxDims], k4[kMaxDims];
  double tmp[kMaxDims];
  d.flow(x, u, std::span<double>(k1, n));
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  d.flow(std::span<const double>(tmp, n), u, std::span<double>(k2, n));
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  d.flow(std::span<const double>(tmp, n), u, std::span<double>(k3, n));
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
  d.flow(std::span<const double>(tmp, n), u, std::span<double>(k4, n));
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

}  // namespace

Trajectory rollout(const ScalarField& V, const ControlAffineDynamics& d,
                   const ConstraintBox& constraint, const Policy& nominal,
                   std::span<const double> x0, double horizon, double dt,
                   const FilterConfig& cfg, bool use_filter,
                   double divergence_margin) {
  cfg.validate();
  if (!(dt > 0.0)) throw ConfigError("rollout: dt must be positive");
  if (!(horizon >= dt)) throw ConfigError("rollout: horizon shorter than dt");
  const Grid& g = V.grid();
  if (x0.size() != g.dims())
    throw DimensionMismatch("rollout: start state size mismatch");
  if (!g.contains(x0)) throw OutOfDomain("rollout: start state outside grid");

  const std::size_t steps =
      static_cast<std::size_t>(std::llround(horizon / dt));
  std::vector<double> escape_lo(g.dims()), escape_hi(g.dims());
  for (std::size_t i = 0; i < g.dims(); ++i) {
    const double extent = g.hi()[i] - g.lo()[i];
    escape_lo[i] = g.lo()[i] - divergence_margin * extent;
    escape_hi[i] = g.hi()[i] + divergence_margin * extent;
  }

  Trajectory traj;
  traj.times.reserve(steps + 1);
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> xn(g.dims());

  auto record = [&](double t) {
    std::vector<double> u;
    bool active = false;
    bool clamped;
    double h;
    if (use_filter) {
      FilterDecision dec = filter_control(V, d, x, nominal.evaluate(d, x), cfg);
      u = std::move(dec.control);
      active = dec.status != FilterStatus::NominalFeasible;
      clamped = dec.clamped_state;
      h = interpolate_clamped(V, x).value;
    } else {
      u = nominal.evaluate(d, x);
      const ClampedSample s = interpolate_clamped(V, x);
      h = s.value;
      clamped = s.clamped;
    }
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.h_values.push_back(h);
    traj.safe_flags.push_back(constraint.margin(x) >= 0.0 ? 1 : 0);
    traj.filter_active_flags.push_back(active ? 1 : 0);
    traj.clamped_flags.push_back(clamped ? 1 : 0);
    traj.controls.push_back(std::move(u));
  };

  record(0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    rk4_step(d, x, traj.controls.back(), dt, xn);
    x = xn;
    bool escaped = false;
    for (std::size_t i = 0; i < g.dims(); ++i) {
      if (x[i] < escape_lo[i] || x[i] > escape_hi[i]) escaped = true;
    }
    record(static_cast<double>(k + 1) * dt);
    if (escaped) {
      traj.diverged = true;
      break;
    }
  }
  return traj;
}

RolloutMetrics evaluate_rollouts(std::span<const Trajectory> batch) {
  if (batch.empty()) throw EmptyBatch("evaluate_rollouts: empty batch");
  RolloutMetrics m;
  std::size_t total_states = 0, unsafe_states = 0, active_steps = 0;
  std::size_t clamped_steps = 0, unsafe_rollouts = 0;
  double recovery_sum = 0.0;
  std::size_t episodes = 0;
  for (const Trajectory& t : batch) {
    total_states += t.safe_flags.size();
    bool any_unsafe = false;
    for (std::size_t k = 0; k < t.safe_flags.size(); ++k) {
      if (!t.safe_flags[k]) {
        ++unsafe_states;
        any_unsafe = true;
      }
      if (t.filter_active_flags[k]) ++active_steps;
      if (t.clamped_flags[k]) ++clamped_steps;
    }
    if (any_unsafe) ++unsafe_rollouts;
    if (t.diverged) ++m.diverged_count;
    // Unsafe episodes: maximal runs of unsafe samples; a run cut off by the
    // trajectory end counts with its truncated length.
    std::size_t k = 0;
    while (k < t.safe_flags.size()) {
      if (!t.safe_flags[k]) {
        std::size_t e = k;
        while (e + 1 < t.safe_flags.size() && !t.safe_flags[e + 1]) ++e;
        recovery_sum += t.times[e] - t.times[k] +
                        (e + 1 < t.times.size() ? t.times[e + 1] - t.times[e]
                                                : 0.0);
        ++episodes;
        k = e + 1;
      } else {
        ++k;
      }
    }
  }
  m.unsafe_state_share =
      100.0 * static_cast<double>(unsafe_states) /
      static_cast<double>(total_states);
  m.unsafe_rollout_share =
      100.0 * static_cast<double>(unsafe_rollouts) /
      static_cast<double>(batch.size());
  m.filter_activity = 100.0 * static_cast<double>(active_steps) /
                      static_cast<double>(total_states);
  m.clamped_state_share = 100.0 * static_cast<double>(clamped_steps) /
                          static_cast<double>(total_states);
  m.unsafe_episodes = episodes;
  m.mean_recovery_time =
      episodes > 0 ? recovery_sum / static_cast<double>(episodes) : 0.0;
  return m;
}

std::vector<std::vector<double>> sample_safe_starts(const ScalarField& V,
                                                    std::size_t count,
                                                    double margin,
                                                    std::uint64_t seed) {
  const Grid& g = V.grid();
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  std::vector<double> x(g.dims());
  const std::size_t budget = count * 10'000;
  for (std::size_t attempt = 0; attempt < budget && out.size() < count;
       ++attempt) {
    for (std::size_t i = 0; i < g.dims(); ++i)
      x[i] = rng.uniform(g.lo()[i], g.hi()[i]);
    if (interpolate(V, x) >= margin) out.push_back(x);
  }
  if (out.size() < count)
    throw EmptySafeSet("sample_safe_starts: budget exhausted at " +
                       std::to_string(out.size()) + " of " +
                       std::to_string(count) + " samples");
  return out;
}

}  // namespace hjpatch
