#include "hjpatch/solver_global.hpp"

#include <chrono>
#include <cmath>

#include "hjpatch/parallel.hpp"

namespace hjpatch {

StepResult global_step(const ScalarField& V, ScalarField& out,
                       const LevelSetKernel& kernel, double write_rate_tol,
                       unsigned threads) {
  const Grid& g = kernel.grid();
  if (!(V.grid() == g) || !(out.grid() == g))
    throw ShapeMismatch("global_step: field grid does not match kernel grid");
  if (V.values().data() == out.values().data())
    throw ShapeMismatch("global_step: output must not alias input");
  const std::size_t n = g.cell_count();
  const double dt = kernel.timestep();
  std::span<const double> vin = V.values();
  std::span<double> vout = out.values();

  const std::size_t nchunks = parallel_chunk_count(n, threads);
  std::vector<double> chunk_max(nchunks, 0.0);
  std::vector<std::size_t> chunk_written(nchunks, 0);
  parallel_for(n, threads, [&](std::size_t c, std::size_t begin,
                               std::size_t end) {
    std::size_t idx[kMaxDims];
    g.unflatten(begin, std::span<std::size_t>(idx, g.dims()));
    double local_max = 0.0;
    std::size_t written = 0;
    for (std::size_t flat = begin; flat < end; ++flat) {
      const double h =
          kernel.hamiltonian(vin, std::span<const std::size_t>(idx, g.dims()),
                             flat);
      if (!std::isfinite(h)) {
        throw NonFiniteValue(
            "global_step: non-finite Hamiltonian at flat index " +
            std::to_string(flat));
      }
      const double rate = h < 0.0 ? -h : 0.0;
      if (rate > local_max) local_max = rate;
      if (rate > write_rate_tol) {
        vout[flat] = vin[flat] - dt * rate;
        ++written;
      } else {
        vout[flat] = vin[flat];
      }
      g.advance(std::span<std::size_t>(idx, g.dims()));
    }
    chunk_max[c] = local_max;
    chunk_written[c] = written;
  });

  StepResult res;
  res.step = dt;
  res.evals = n;
  for (std::size_t c = 0; c < nchunks; ++c) {
    res.max_decrease = std::max(res.max_decrease, chunk_max[c] * dt);
    res.cells_written += chunk_written[c];
  }
  return res;
}

std::pair<ScalarField, StepResult> global_step(const ScalarField& V,
                                               const ControlAffineDynamics& d,
                                               const NumericsConfig& cfg) {
  LevelSetKernel kernel(d, V.grid_ptr(), cfg);
  ScalarField out(V.grid_ptr());
  StepResult res = global_step(V, out, kernel);
  return {std::move(out), res};
}

std::pair<ScalarField, SolveStats> solve_global(const ScalarField& V0,
                                                const ControlAffineDynamics& d,
                                                const NumericsConfig& cfg,
                                                const ConvergenceConfig& conv,
                                                unsigned threads) {
  conv.validate();
  const auto t0 = std::chrono::steady_clock::now();
  LevelSetKernel kernel(d, V0.grid_ptr(), cfg);

  ScalarField current = V0;
  ScalarField next(V0.grid_ptr());
  SolveStats stats;
  while (stats.sweeps < conv.max_sweeps) {
    StepResult step = global_step(current, next, kernel, conv.tol, threads);
    ++stats.sweeps;
    stats.hamiltonian_evals += step.evals;
    stats.max_residual_history.push_back(step.max_decrease / step.step);
    std::swap(current, next);
    if (step.max_decrease <= conv.tol * step.step) {
      stats.converged = true;
      break;
    }
  }
  stats.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return {std::move(current), stats};
}

}  // namespace hjpatch
