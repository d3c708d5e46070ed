#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "hjpatch/barrier_io.hpp"
#include "hjpatch/errors.hpp"
#include "hjpatch/solver_global.hpp"
#include "hjpatch/solver_patch.hpp"
#include "hjpatch/systems.hpp"
#include "test_util.hpp"

using namespace hjpatch;

namespace {

struct DiSetup {
  BenchmarkSystem sys = double_integrator(1.0);
  GridPtr grid = make_grid(sys.grid_lo, sys.grid_hi, {41, 41});
  NumericsConfig ncfg;
  ConvergenceConfig conv;
  PatchConfig pcfg;

  ScalarField solve_truth() const {
    auto [V, stats] =
        solve_global(constraint_field(grid, sys.constraint), sys.dynamics,
                     ncfg, conv);
    REQUIRE(stats.converged);
    return V;
  }
};

}  // namespace

TEST_CASE("active sets deduplicate, sort, and validate members") {
  GridPtr g = make_grid({0.0}, {1.0}, {5});
  auto q = ActiveSet::from_flats(g, {3, 1, 3, 0});
  CHECK(q.members() == std::vector<std::size_t>{0, 1, 3});
  CHECK(q.contains(1));
  CHECK_FALSE(q.contains(2));
  CHECK_THROWS_AS(ActiveSet::from_flats(g, {5}), IndexOutOfRange);
}

TEST_CASE("band initialization keeps |h| <= zeta minus certified cells") {
  GridPtr g = make_grid({0.0}, {3.0}, {4});
  ScalarField h(g, {-0.2, -0.05, 0.05, 0.2});
  ResolvedPatchConfig cfg;
  cfg.zeta = 0.1;
  cfg.pad_radius = 1;

  auto q = init_active_set(h, {}, cfg);
  CHECK(q.members() == std::vector<std::size_t>{1, 2});

  std::vector<std::uint8_t> certified{0, 0, 1, 0};
  auto q2 = init_active_set(h, certified, cfg);
  CHECK(q2.members() == std::vector<std::size_t>{1});

  std::vector<std::uint8_t> bad(3, 0);
  CHECK_THROWS_AS(init_active_set(h, bad, cfg), ShapeMismatch);

  ScalarField ones(g, 1.0);
  CHECK(init_active_set(ones, {}, cfg).empty());
}

TEST_CASE("zeta defaults to three spacings of estimated slope") {
  GridPtr g = make_grid({0.0}, {1.0}, {11});  // spacing 0.1
  ScalarField h(g);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = 2.0 * (0.1 * double(i));

  CHECK(estimate_lipschitz(h) == doctest::Approx(2.0).epsilon(1e-12));

  PatchConfig pcfg;  // zeta 0: derive from the field
  auto resolved = resolve_patch_config(pcfg, h, NumericsConfig{},
                                       ConvergenceConfig{});
  CHECK(resolved.zeta == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(resolved.pad_radius == 1);
  CHECK(resolved.decrease_tol == doctest::Approx(1e-4).epsilon(1e-12));

  // Constant fields have no slope; the band falls back to one spacing.
  ScalarField flat(g, 0.0);
  auto rflat = resolve_patch_config(pcfg, flat, NumericsConfig{},
                                    ConvergenceConfig{});
  CHECK(rflat.zeta == doctest::Approx(0.1).epsilon(1e-12));

  PatchConfig thin;
  thin.pad_radius = 1;
  NumericsConfig wide;
  wide.stencil_order = 2;
  CHECK_THROWS_AS(resolve_patch_config(thin, h, wide, ConvergenceConfig{}),
                  ConfigError);
}

TEST_CASE("one decreasing cell grows into its cross neighborhood") {
  DiSetup s;
  GridPtr g = make_grid(s.sys.grid_lo, s.sys.grid_hi, {9, 9});
  // An isolated peak at (0, 1.25) cannot be held (v > 0 drives x into lower
  // neighbors), so H < 0 exactly there; every other cell is kept out of the
  // initial set by the certified mask. The origin would not do: it is an
  // equilibrium, and the upwind Hamiltonian rightly reports H = 0 for a
  // one-point invariant set.
  ScalarField V(g, -0.05);
  const std::size_t center = g->flatten(std::array<std::size_t, 2>{4, 6});
  V[center] = 0.0;

  ResolvedPatchConfig cfg;
  cfg.zeta = 0.1;
  cfg.pad_radius = 1;
  cfg.decrease_tol = 1e-4;
  cfg.max_iterations = 100;

  std::vector<std::uint8_t> certified(g->cell_count(), 1);
  certified[center] = 0;
  auto q = init_active_set(V, certified, cfg);
  REQUIRE(q.members() == std::vector<std::size_t>{center});

  LevelSetKernel kernel(s.sys.dynamics, g, s.ncfg);
  auto res = patch_iteration_inplace(V, q, kernel, cfg);
  CHECK(res.evals == 1);
  CHECK(res.cells_written == 1);

  std::vector<std::size_t> expect{center - g->strides()[0],
                                  center - g->strides()[1], center,
                                  center + g->strides()[1],
                                  center + g->strides()[0]};
  std::sort(expect.begin(), expect.end());
  CHECK(res.next.members() == expect);
}

TEST_CASE("a converged field terminates in one band sweep, unchanged") {
  DiSetup s;
  ScalarField truth = s.solve_truth();

  auto result = patch(truth, {}, s.sys.dynamics, s.pcfg, s.ncfg, s.conv);
  CHECK(result.stats.converged);
  CHECK(result.stats.sweeps == 1);
  for (std::size_t i = 0; i < truth.size(); ++i)
    CHECK(result.field[i] == truth[i]);
}

TEST_CASE("fields below the band produce a vacuous empty run") {
  DiSetup s;
  GridPtr g = make_grid(s.sys.grid_lo, s.sys.grid_hi, {9, 9});
  ScalarField h(g, -5.0);
  PatchConfig pcfg;
  pcfg.zeta = 0.5;

  auto result = patch(h, {}, s.sys.dynamics, pcfg, s.ncfg, s.conv);
  CHECK(result.stats.converged);
  CHECK(result.stats.sweeps == 0);
  CHECK(result.stats.hamiltonian_evals == 0);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(result.field[i] == h[i]);
}

TEST_CASE("iterations touch only active cells and never raise them") {
  DiSetup s;
  ScalarField truth = s.solve_truth();

  PerturbationSpec spec;
  spec.kind = PerturbationKind::RadialBump;
  spec.center = {0.7, 0.9};
  spec.radius = 0.5;
  spec.amplitude = 0.15;
  ScalarField h = synth_almost_barrier(truth, spec);

  auto resolved = resolve_patch_config(s.pcfg, h, s.ncfg, s.conv);
  LevelSetKernel kernel(s.sys.dynamics, s.grid, s.ncfg);
  ScalarField V = h;
  ActiveSet q = init_active_set(h, {}, resolved);
  REQUIRE_FALSE(q.empty());

  std::size_t guard = 0;
  while (!q.empty() && guard++ < resolved.max_iterations) {
    ScalarField before = V;
    auto res = patch_iteration_inplace(V, q, kernel, resolved);

    std::vector<std::size_t> changed;
    for (std::size_t i = 0; i < V.size(); ++i)
      if (V[i] != before[i]) changed.push_back(i);
    CHECK(changed.size() == res.cells_written);
    for (std::size_t c : changed) {
      CHECK(q.contains(c));
      CHECK(V[c] < before[c]);
    }

    // Halo soundness: every neighbor of a written cell that still lies in
    // the band must be queued for the next iteration.
    const Grid& g = *s.grid;
    std::vector<std::size_t> idx(g.dims());
    for (std::size_t c : changed) {
      g.unflatten(c, idx);
      for_each_axis_neighbor(g, idx, resolved.pad_radius, [&](std::size_t nb) {
        if (std::abs(V[nb]) <= resolved.zeta) CHECK(res.next.contains(nb));
      });
      if (std::abs(V[c]) <= resolved.zeta) CHECK(res.next.contains(c));
    }
    q = std::move(res.next);
  }
  CHECK(q.empty());
}

TEST_CASE("patched bumps recover the reference safe set") {
  DiSetup s;
  ScalarField truth = s.solve_truth();

  PerturbationSpec spec;
  spec.kind = PerturbationKind::RadialBump;
  spec.center = {0.8, 1.2};
  spec.radius = 0.6;
  spec.amplitude = 0.2;
  ScalarField h = synth_almost_barrier(truth, spec);

  // Oracle: warm-started global solve from the same optimistic start.
  auto [Vstar, gstats] = solve_global(h, s.sys.dynamics, s.ncfg, s.conv);
  REQUIRE(gstats.converged);

  auto result = patch(h, {}, s.sys.dynamics, s.pcfg, s.ncfg, s.conv);
  REQUIRE(result.stats.converged);

  // Patch numbers: evals sum the active-set sizes; replay the march to
  // check the accounting exactly.
  {
    auto resolved = resolve_patch_config(s.pcfg, h, s.ncfg, s.conv);
    LevelSetKernel kernel(s.sys.dynamics, s.grid, s.ncfg);
    ScalarField V = h;
    ActiveSet q = init_active_set(h, {}, resolved);
    std::size_t total = 0, iters = 0;
    while (!q.empty()) {
      total += q.size();
      auto res = patch_iteration_inplace(V, q, kernel, resolved);
      q = std::move(res.next);
      ++iters;
    }
    CHECK(total == result.stats.hamiltonian_evals);
    CHECK(iters == result.stats.sweeps);
    for (std::size_t i = 0; i < V.size(); ++i) CHECK(V[i] == result.field[i]);
  }

  // Never below the global solution (up to tol), and same set up to the
  // boundary band.
  for (std::size_t i = 0; i < truth.size(); ++i)
    CHECK(result.field[i] >= Vstar[i] - s.conv.tol);
  auto diff = testutil::superlevel_symmetric_difference(result.field, Vstar);
  CHECK(testutil::within_boundary_band(Vstar, diff));
}

TEST_CASE("the certificate accepts patched fields and locates leaks") {
  DiSetup s;
  ScalarField truth = s.solve_truth();

  PerturbationSpec spec;
  spec.kind = PerturbationKind::RadialBump;
  spec.center = {0.85, 0.6};
  spec.radius = 0.45;
  spec.amplitude = 0.2;
  ScalarField leaky = synth_almost_barrier(truth, spec);

  auto resolved = resolve_patch_config(s.pcfg, leaky, s.ncfg, s.conv);

  // The optimistic bump claims states beyond the braking limit, which the
  // certificate must flag before patching, inside the bump's footprint.
  auto before = invariance_certificate(leaky, s.sys.dynamics, resolved.zeta,
                                       s.ncfg, s.conv.tol);
  REQUIRE_FALSE(before.certified());
  const Grid& g = *s.grid;
  for (const auto& v : before.violations) {
    auto x = g.state_of_flat(v.flat);
    const double r = std::hypot(x[0] - spec.center[0], x[1] - spec.center[1]);
    CHECK(r <= spec.radius + 2.0 * g.max_spacing());
    CHECK(v.hamiltonian < -s.conv.tol);
  }

  auto result = patch(leaky, {}, s.sys.dynamics, s.pcfg, s.ncfg, s.conv);
  REQUIRE(result.stats.converged);
  auto after = invariance_certificate(result.field, s.sys.dynamics,
                                      result.resolved.zeta, s.ncfg,
                                      s.conv.tol);
  CHECK(after.certified());
  CHECK(after.boundary_cells > 0);

  // Vacuous case: no safe set, no boundary, certified by emptiness.
  ScalarField empty(s.grid, -1.0);
  auto vac = invariance_certificate(empty, s.sys.dynamics, 0.1, s.ncfg,
                                    s.conv.tol);
  CHECK(vac.certified());
  CHECK(vac.boundary_cells == 0);
}

TEST_CASE("certified masks freeze their cells") {
  DiSetup s;
  ScalarField truth = s.solve_truth();

  PerturbationSpec spec;
  spec.kind = PerturbationKind::RadialBump;
  spec.center = {0.8, 1.2};
  spec.radius = 0.6;
  spec.amplitude = 0.2;
  ScalarField h = synth_almost_barrier(truth, spec);

  // Certify everything: the initial set is empty and nothing moves.
  std::vector<std::uint8_t> all(s.grid->cell_count(), 1);
  auto result = patch(h, all, s.sys.dynamics, s.pcfg, s.ncfg, s.conv);
  CHECK(result.stats.sweeps == 0);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(result.field[i] == h[i]);
}
