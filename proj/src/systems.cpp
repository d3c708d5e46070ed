#include "hjpatch/systems.hpp"

#include <cmath>
#include <limits>

namespace hjpatch {

double ConstraintBox::margin(std::span<const double> x) const {
  if (x.size() != lo.size() || x.size() != hi.size())
    throw DimensionMismatch("constraint margin: size mismatch");
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(lo[i])) m = std::min(m, x[i] - lo[i]);
    if (std::isfinite(hi[i])) m = std::min(m, hi[i] - x[i]);
  }
  return m;
}

ScalarField constraint_field(const GridPtr& g, const ConstraintBox& box) {
  if (box.lo.size() != g->dims())
    throw DimensionMismatch("constraint_field: box dims mismatch");
  ScalarField f(g);
  std::vector<double> x(g->dims());
  MultiIndex idx(g->dims(), 0);
  for (std::size_t flat = 0; flat < g->cell_count(); ++flat) {
    g->state_of(idx, x);
    f[flat] = box.margin(x);
    g->advance(idx);
  }
  return f;
}

BenchmarkSystem double_integrator(double u_max) {
  ControlAffineDynamics dyn(
      2, 1,
      [](std::span<const double> x, std::span<double> out) {
        out[0] = x[1];
        out[1] = 0.0;
      },
      [](std::span<const double>, std::span<double> g) {
        g[0] = 0.0;
        g[1] = 1.0;
      },
      {-u_max}, {u_max});
  const double inf = std::numeric_limits<double>::infinity();
  return BenchmarkSystem{"double_integrator", std::move(dyn),
                         ConstraintBox{{-1.0, -inf}, {1.0, inf}},
                         {-1.2, -2.5},
                         {1.2, 2.5},
                         {101, 101}};
}

BenchmarkSystem quad4d() {
  constexpr double m = 1.0, grav = 9.81, inertia = 0.1;
  ControlAffineDynamics dyn(
      4, 2,
      [](std::span<const double> x, std::span<double> out) {
        out[0] = x[1];
        out[1] = -grav;
        out[2] = x[3];
        out[3] = 0.0;
      },
      [](std::span<const double> x, std::span<double> g) {
        // columns: thrust, moment
        g[0] = 0.0;               g[1] = 0.0;
        g[2] = std::cos(x[2]) / m; g[3] = 0.0;
        g[4] = 0.0;               g[5] = 0.0;
        g[6] = 0.0;               g[7] = 1.0 / inertia;
      },
      {0.0, -1.0}, {2.0 * m * grav, 1.0});
  const double inf = std::numeric_limits<double>::infinity();
  return BenchmarkSystem{
      "quad4d", std::move(dyn),
      ConstraintBox{{0.5, -inf, -inf, -inf}, {3.5, inf, inf, inf}},
      {0.0, -4.0, -1.2, -4.0},
      {4.0, 4.0, 1.2, 4.0},
      {31, 31, 31, 31}};
}

BenchmarkSystem planar_quad6d() {
  constexpr double m = 1.0, grav = 9.81, inertia = 0.1, arm = 0.25;
  ControlAffineDynamics dyn(
      6, 2,
      [](std::span<const double> x, std::span<double> out) {
        out[0] = x[2];
        out[1] = x[3];
        out[2] = 0.0;
        out[3] = -grav;
        out[4] = x[5];
        out[5] = 0.0;
      },
      [](std::span<const double> x, std::span<double> g) {
        const double s = std::sin(x[4]), c = std::cos(x[4]);
        // columns: left thrust, right thrust
        g[0] = 0.0;       g[1] = 0.0;
        g[2] = 0.0;       g[3] = 0.0;
        g[4] = -s / m;    g[5] = -s / m;
        g[6] = c / m;     g[7] = c / m;
        g[8] = 0.0;       g[9] = 0.0;
        g[10] = -arm / inertia; g[11] = arm / inertia;
      },
      {0.0, 0.0}, {m * grav, m * grav});
  const double inf = std::numeric_limits<double>::infinity();
  return BenchmarkSystem{
      "planar_quad6d", std::move(dyn),
      ConstraintBox{{-2.0, 0.5, -inf, -inf, -inf, -inf},
                    {2.0, 3.5, inf, inf, inf, inf}},
      {-2.4, 0.0, -3.0, -3.0, -1.2, -3.0},
      {2.4, 4.0, 3.0, 3.0, 1.2, 3.0},
      {13, 13, 13, 13, 13, 13}};
}

BenchmarkSystem benchmark_by_name(const std::string& name) {
  if (name == "double_integrator") return double_integrator();
  if (name == "quad4d") return quad4d();
  if (name == "planar_quad6d") return planar_quad6d();
  throw ConfigError("unknown benchmark system: " + name);
}

}  // namespace hjpatch
