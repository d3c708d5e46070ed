#include "hjpatch/solver_patch.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hjpatch/parallel.hpp"

namespace hjpatch {

ActiveSet::ActiveSet(GridPtr grid)
    : grid_(std::move(grid)), mask_(grid_->cell_count(), 0) {}

ActiveSet ActiveSet::from_flats(GridPtr grid, std::vector<std::size_t> flats) {
  ActiveSet s(std::move(grid));
  const std::size_t n = s.grid_->cell_count();
  for (std::size_t f : flats) {
    if (f >= n)
      throw IndexOutOfRange("active set: flat index " + std::to_string(f) +
                            " outside grid");
  }
  std::sort(flats.begin(), flats.end());
  flats.erase(std::unique(flats.begin(), flats.end()), flats.end());
  for (std::size_t f : flats) s.mask_[f] = 1;
  s.members_ = std::move(flats);
  return s;
}

double estimate_lipschitz(const ScalarField& f) {
  const Grid& g = f.grid();
  std::span<const double> v = f.values();
  double best = 0.0;
  std::size_t idx[kMaxDims];
  std::span<std::size_t> idxs(idx, g.dims());
  g.unflatten(0, idxs);
  for (std::size_t flat = 0; flat < g.cell_count(); ++flat) {
    for (std::size_t d = 0; d < g.dims(); ++d) {
      if (idx[d] + 1 < g.shape()[d]) {
        const double diff =
            std::abs(v[flat + g.strides()[d]] - v[flat]) / g.spacing()[d];
        if (diff > best) best = diff;
      }
    }
    g.advance(idxs);
  }
  return best;
}

ResolvedPatchConfig resolve_patch_config(const PatchConfig& cfg,
                                         const ScalarField& h,
                                         const NumericsConfig& ncfg,
                                         const ConvergenceConfig& conv) {
  ncfg.validate();
  conv.validate();
  if (cfg.zeta < 0.0) throw ConfigError("patch: zeta must be positive");
  if (cfg.decrease_tol < 0.0)
    throw ConfigError("patch: decrease_tol must be positive");
  if (cfg.max_iterations == 0)
    throw ConfigError("patch: max_iterations must be positive");
  ResolvedPatchConfig r;
  r.zeta = cfg.zeta;
  if (r.zeta == 0.0) {
    const double lipschitz = estimate_lipschitz(h);
    r.zeta = 3.0 * h.grid().max_spacing() * lipschitz;
    if (r.zeta <= 0.0) {
      // Constant field: any positive band works, none of it will march.
      r.zeta = h.grid().max_spacing();
    }
  }
  r.pad_radius = cfg.pad_radius == 0 ? ncfg.stencil_order : cfg.pad_radius;
  if (r.pad_radius < ncfg.stencil_order)
    throw ConfigError("patch: pad_radius must cover the stencil order");
  r.decrease_tol = cfg.decrease_tol == 0.0 ? conv.tol : cfg.decrease_tol;
  r.max_iterations = cfg.max_iterations;
  return r;
}

ActiveSet init_active_set(const ScalarField& h,
                          std::span<const std::uint8_t> certified,
                          const ResolvedPatchConfig& cfg) {
  const std::size_t n = h.size();
  if (!certified.empty() && certified.size() != n)
    throw ShapeMismatch("init_active_set: certified mask size mismatch");
  std::vector<std::size_t> flats;
  std::span<const double> v = h.values();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(v[i]) > cfg.zeta) continue;
    if (!certified.empty() && certified[i]) continue;
    flats.push_back(i);
  }
  return ActiveSet::from_flats(h.grid_ptr(), flats);
}

namespace {

// Next active set from the written cells: pad by the halo radius along each
// axis, then keep cells inside the post-update band.
ActiveSet build_next_set(const Grid& g, GridPtr grid_ptr,
                         const std::vector<std::size_t>& written,
                         std::span<const double> v_new, double zeta,
                         std::size_t pad_radius) {
  std::vector<std::size_t> flats;
  flats.reserve(written.size() * (1 + 2 * pad_radius * g.dims()));
  std::size_t idx[kMaxDims];
  std::span<std::size_t> idxs(idx, g.dims());
  for (std::size_t flat : written) {
    if (std::abs(v_new[flat]) <= zeta) flats.push_back(flat);
    g.unflatten(flat, idxs);
    for (std::size_t d = 0; d < g.dims(); ++d) {
      const std::size_t stride = g.strides()[d];
      for (std::size_t r = 1; r <= pad_radius; ++r) {
        if (idx[d] >= r) {
          const std::size_t nb = flat - r * stride;
          if (std::abs(v_new[nb]) <= zeta) flats.push_back(nb);
        }
        if (idx[d] + r < g.shape()[d]) {
          const std::size_t nb = flat + r * stride;
          if (std::abs(v_new[nb]) <= zeta) flats.push_back(nb);
        }
      }
    }
  }
  return ActiveSet::from_flats(std::move(grid_ptr), std::move(flats));
}

}  // namespace

PatchIterationResult patch_iteration_inplace(ScalarField& V,
                                             const ActiveSet& Q,
                                             const LevelSetKernel& kernel,
                                             const ResolvedPatchConfig& cfg,
                                             unsigned threads) {
  const Grid& g = kernel.grid();
  if (!(V.grid() == g))
    throw ShapeMismatch("patch_iteration: field grid does not match kernel");
  const double dt = kernel.timestep();
  const std::vector<std::size_t>& members = Q.members();
  std::span<const double> vin = V.values();

  const std::size_t nchunks = parallel_chunk_count(members.size(), threads);
  std::vector<std::vector<std::size_t>> chunk_written(nchunks);
  std::vector<std::vector<double>> chunk_values(nchunks);
  std::vector<double> chunk_max(nchunks, 0.0);
  parallel_for(members.size(), threads,
               [&](std::size_t c, std::size_t begin, std::size_t end) {
                 std::size_t idx[kMaxDims];
                 std::span<std::size_t> idxs(idx, g.dims());
                 auto& written = chunk_written[c];
                 auto& values = chunk_values[c];
                 double local_max = 0.0;
                 for (std::size_t k = begin; k < end; ++k) {
                   const std::size_t flat = members[k];
                   g.unflatten(flat, idxs);
                   const double h = kernel.hamiltonian(vin, idxs, flat);
                   if (!std::isfinite(h)) {
                     throw NonFiniteValue(
                         "patch_iteration: non-finite Hamiltonian at flat "
                         "index " +
                         std::to_string(flat));
                   }
                   const double rate = h < 0.0 ? -h : 0.0;
                   if (rate > local_max) local_max = rate;
                   if (rate > cfg.decrease_tol) {
                     written.push_back(flat);
                     values.push_back(vin[flat] - dt * rate);
                   }
                 }
                 chunk_max[c] = local_max;
               });

  // Apply after the sweep so every read above saw the pre-sweep field.
  std::vector<std::size_t> written;
  std::span<double> vout = V.values();
  PatchIterationResult res{ActiveSet(V.grid_ptr()), members.size(), 0, 0.0, dt};
  for (std::size_t c = 0; c < nchunks; ++c) {
    res.max_rate = std::max(res.max_rate, chunk_max[c]);
    for (std::size_t k = 0; k < chunk_written[c].size(); ++k) {
      vout[chunk_written[c][k]] = chunk_values[c][k];
    }
    written.insert(written.end(), chunk_written[c].begin(),
                   chunk_written[c].end());
  }
  res.cells_written = written.size();
  res.next = build_next_set(g, V.grid_ptr(), written, vout, cfg.zeta,
                            cfg.pad_radius);
  res.next.set_generation(Q.generation() + 1);
  return res;
}

std::tuple<ScalarField, ActiveSet, std::size_t> patch_iteration(
    const ScalarField& V, const ActiveSet& Q, const ControlAffineDynamics& d,
    const PatchConfig& cfg, const NumericsConfig& ncfg,
    const ConvergenceConfig& conv) {
  if (Q.empty()) throw EmptyBatch("patch_iteration: active set is empty");
  ResolvedPatchConfig r = resolve_patch_config(cfg, V, ncfg, conv);
  LevelSetKernel kernel(d, V.grid_ptr(), ncfg);
  ScalarField out = V;
  PatchIterationResult step = patch_iteration_inplace(out, Q, kernel, r);
  return {std::move(out), std::move(step.next), step.evals};
}

PatchResult patch(const ScalarField& h, std::span<const std::uint8_t> certified,
                  const ControlAffineDynamics& d, const PatchConfig& cfg,
                  const NumericsConfig& ncfg, const ConvergenceConfig& conv,
                  unsigned threads) {
  h.check_finite("patch");
  const auto t0 = std::chrono::steady_clock::now();
  ResolvedPatchConfig r = resolve_patch_config(cfg, h, ncfg, conv);
  LevelSetKernel kernel(d, h.grid_ptr(), ncfg);

  PatchResult res{h, SolveStats{}, r};
  ActiveSet q = init_active_set(h, certified, r);
  while (!q.empty()) {
    if (res.stats.sweeps >= r.max_iterations) break;
    PatchIterationResult step =
        patch_iteration_inplace(res.field, q, kernel, r, threads);
    ++res.stats.sweeps;
    res.stats.hamiltonian_evals += step.evals;
    res.stats.max_residual_history.push_back(step.max_rate);
    q = std::move(step.next);
  }
  res.stats.converged = q.empty();
  res.stats.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

CertificateReport invariance_certificate(const ScalarField& V,
                                         const ControlAffineDynamics& d,
                                         double zeta,
                                         const NumericsConfig& ncfg,
                                         double tol) {
  V.check_finite("invariance_certificate");
  ncfg.validate();
  if (!(zeta > 0.0)) throw ConfigError("certificate: zeta must be positive");
  if (!(tol > 0.0)) throw ConfigError("certificate: tol must be positive");
  LevelSetKernel kernel(d, V.grid_ptr(), ncfg);
  const Grid& g = V.grid();
  std::span<const double> v = V.values();
  const std::size_t radius = ncfg.stencil_order;

  CertificateReport report;
  std::size_t idx[kMaxDims];
  std::span<std::size_t> idxs(idx, g.dims());
  g.unflatten(0, idxs);
  for (std::size_t flat = 0; flat < g.cell_count(); ++flat) {
    if (std::abs(v[flat]) <= zeta) {
      const bool safe = v[flat] >= 0.0;
      bool crossing = false;
      for (std::size_t dd = 0; dd < g.dims() && !crossing; ++dd) {
        const std::size_t stride = g.strides()[dd];
        for (std::size_t rr = 1; rr <= radius && !crossing; ++rr) {
          if (idx[dd] >= rr && (v[flat - rr * stride] >= 0.0) != safe)
            crossing = true;
          if (idx[dd] + rr < g.shape()[dd] &&
              (v[flat + rr * stride] >= 0.0) != safe)
            crossing = true;
        }
      }
      if (crossing) {
        ++report.boundary_cells;
        const double h = kernel.hamiltonian(v, idxs, flat);
        if (h < -tol) report.violations.push_back({flat, h});
      }
    }
    g.advance(idxs);
  }
  return report;
}

}  // namespace hjpatch
