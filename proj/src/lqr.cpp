#include "hjpatch/lqr.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace hjpatch {

namespace {

// Row-major helpers on flat buffers; sizes are a handful of entries, so
// plain loops beat any library dispatch here.
void mat_mul(std::span<const double> a, std::span<const double> b,
             std::size_t n, std::size_t k, std::size_t m,
             std::span<double> out) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
      out[i * m + j] = acc;
    }
  }
}

// Gauss-Jordan inverse with partial pivoting; m is destroyed.
void mat_inverse(std::vector<double>& m, std::size_t n,
                 std::vector<double>& out) {
  out.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out[i * n + i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(m[r * n + col]) > std::abs(m[pivot * n + col])) pivot = r;
    }
    if (std::abs(m[pivot * n + col]) < 1e-300)
      throw NonConvergence("lqr: singular matrix in R inverse");
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(m[pivot * n + c], m[col * n + c]);
        std::swap(out[pivot * n + c], out[col * n + c]);
      }
    }
    const double inv = 1.0 / m[col * n + col];
    for (std::size_t c = 0; c < n; ++c) {
      m[col * n + c] *= inv;
      out[col * n + c] *= inv;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m[r * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        m[r * n + c] -= f * m[col * n + c];
        out[r * n + c] -= f * out[col * n + c];
      }
    }
  }
}

void riccati_rhs(std::span<const double> A, std::span<const double> Q,
                 std::span<const double> BRinvBt, std::span<const double> P,
                 std::size_t n, std::vector<double>& tmp1,
                 std::vector<double>& tmp2, std::span<double> out) {
  // A^T P + P A + Q - P BRinvBt P
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = Q[i * n + j];
      for (std::size_t p = 0; p < n; ++p) {
        acc += A[p * n + i] * P[p * n + j] + P[i * n + p] * A[p * n + j];
      }
      out[i * n + j] = acc;
    }
  }
  mat_mul(P, BRinvBt, n, n, n, tmp1);
  mat_mul(tmp1, P, n, n, n, tmp2);
  for (std::size_t i = 0; i < n * n; ++i) out[i] -= tmp2[i];
}

}  // namespace

LqrResult solve_lqr(std::size_t n, std::size_t m, std::span<const double> A,
                    std::span<const double> B, std::span<const double> Q,
                    std::span<const double> R) {
  if (n == 0 || m == 0) throw DimensionMismatch("lqr: empty dimensions");
  if (A.size() != n * n || B.size() != n * m || Q.size() != n * n ||
      R.size() != m * m)
    throw DimensionMismatch("lqr: matrix size mismatch");
  for (std::size_t i = 0; i < m; ++i) {
    if (!(R[i * m + i] > 0.0))
      throw ConfigError("lqr: R must have positive diagonal");
  }

  std::vector<double> Rwork(R.begin(), R.end());
  std::vector<double> Rinv;
  mat_inverse(Rwork, m, Rinv);

  std::vector<double> Bt(m * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) Bt[j * n + i] = B[i * m + j];
  std::vector<double> BRinv(n * m), BRinvBt(n * n);
  mat_mul(B, Rinv, n, m, m, BRinv);
  mat_mul(BRinv, Bt, n, m, n, BRinvBt);

  // Integrate Pdot = A^T P + P A + Q - P B R^-1 B^T P from P = Q. The flow
  // converges to the stabilizing solution when (A, B) is stabilizable.
  std::vector<double> P(Q.begin(), Q.end());
  std::vector<double> rhs(n * n), tmp1(n * n), tmp2(n * n);
  const double dt = 1e-3;
  const double settle_tol = 1e-9;
  const std::size_t max_iters = 40'000'000 / (n * n);
  bool settled = false;
  for (std::size_t it = 0; it < max_iters; ++it) {
    riccati_rhs(A, Q, BRinvBt, P, n, tmp1, tmp2, rhs);
    double max_delta = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) {
      const double step = dt * rhs[i];
      P[i] += step;
      max_delta = std::max(max_delta, std::abs(step));
      if (!std::isfinite(P[i]))
        throw NonConvergence("lqr: Riccati flow diverged");
    }
    if (max_delta <= settle_tol * dt) {
      settled = true;
      break;
    }
  }
  if (!settled)
    throw NonConvergence("lqr: Riccati flow did not settle within budget");

  // Symmetrize against drift accumulated by explicit Euler.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (P[i * n + j] + P[j * n + i]);
      P[i * n + j] = s;
      P[j * n + i] = s;
    }

  LqrResult res;
  res.cost = P;
  res.gain.assign(m * n, 0.0);
  // K = R^-1 B^T P
  std::vector<double> RinvBt(m * n);
  mat_mul(Rinv, Bt, m, m, n, RinvBt);
  mat_mul(RinvBt, P, m, n, n, res.gain);

  riccati_rhs(A, Q, BRinvBt, P, n, tmp1, tmp2, rhs);
  for (double v : rhs) res.residual = std::max(res.residual, std::abs(v));
  return res;
}

void linearize(const ControlAffineDynamics& d, std::span<const double> x_ref,
               std::span<const double> u_ref, std::span<double> A,
               std::span<double> B, double step) {
  const std::size_t n = d.state_dim();
  const std::size_t m = d.input_dim();
  if (x_ref.size() != n || u_ref.size() != m)
    throw DimensionMismatch("linearize: reference size mismatch");
  if (A.size() != n * n || B.size() != n * m)
    throw DimensionMismatch("linearize: output size mismatch");
  std::vector<double> xp(x_ref.begin(), x_ref.end());
  std::vector<double> xm(x_ref.begin(), x_ref.end());
  std::vector<double> fp(n), fm(n);
  for (std::size_t j = 0; j < n; ++j) {
    xp[j] += step;
    xm[j] -= step;
    d.flow(xp, u_ref, fp);
    d.flow(xm, u_ref, fm);
    for (std::size_t i = 0; i < n; ++i)
      A[i * n + j] = (fp[i] - fm[i]) / (2.0 * step);
    xp[j] = x_ref[j];
    xm[j] = x_ref[j];
  }
  if (m > 0) d.input_matrix(x_ref, B);
}

Policy lqr_policy(const ControlAffineDynamics& d, std::vector<double> x_ref,
                  std::vector<double> u_ref, std::span<const double> Q,
                  std::span<const double> R, double drift_tol) {
  const std::size_t n = d.state_dim();
  const std::size_t m = d.input_dim();
  std::vector<double> xdot(n);
  d.flow(x_ref, u_ref, xdot);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(xdot[i]) > drift_tol)
      throw ConfigError("lqr_policy: reference is not an equilibrium, xdot[" +
                        std::to_string(i) + "] = " + std::to_string(xdot[i]));
  }
  std::vector<double> A(n * n), B(n * m);
  linearize(d, x_ref, u_ref, A, B);
  LqrResult res = solve_lqr(n, m, A, B, Q, R);
  return Policy::linear_feedback(std::move(res.gain), std::move(x_ref),
                                 std::move(u_ref));
}

}  // namespace hjpatch
