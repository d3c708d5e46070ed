#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hjpatch/barrier_io.hpp"
#include "hjpatch/config.hpp"
#include "hjpatch/contours.hpp"
#include "hjpatch/errors.hpp"
#include "hjpatch/lqr.hpp"
#include "hjpatch/parallel.hpp"
#include "hjpatch/report.hpp"
#include "hjpatch/safety_filter.hpp"
#include "hjpatch/solver_global.hpp"
#include "hjpatch/solver_patch.hpp"
#include "hjpatch/systems.hpp"

namespace {

using namespace hjpatch;

// Exit codes, also listed in the README: 0 success, 2 config or usage
// error, 3 numerical failure, 4 certificate failure, 5 input-data error.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCertificate = 4;
constexpr int kExitData = 5;

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IOFailure("cannot create output directory '" + dir + "'");
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse '" + item + "' as a number");
    }
  }
  return out;
}

struct LoadedConfig {
  RunConfig run;
  std::string hash;
  BenchmarkSystem system;
  GridPtr grid;
};

LoadedConfig load_setup(const std::string& config_path) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw IOFailure("cannot open config '" + config_path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  RunConfig run = parse_run_config(text);
  BenchmarkSystem system = run.make_system();
  GridPtr grid = run.make_grid_for(system);
  return LoadedConfig{std::move(run), hash_hex(fnv1a64(text)),
                      std::move(system), std::move(grid)};
}

ScalarField load_field_checked(const std::string& path, const Grid& expect,
                               const char* what) {
  ScalarField f = load_field(path);
  if (!(f.grid() == expect))
    throw ShapeMismatch(std::string(what) + " '" + path +
                        "' grid does not match the configured grid");
  return f;
}

Metadata field_metadata(const std::string& command, const std::string& hash) {
  return Metadata{{"artifact", kArtifactVersion},
                  {"command", command},
                  {"config_hash", hash}};
}

// --- solve ---------------------------------------------------------------

struct SolveArgs {
  std::string config;
  std::string init = "constraint";
  std::string output;
  bool allow_partial = false;
  unsigned threads = 0;
};

int run_solve(const SolveArgs& a) {
  LoadedConfig lc = load_setup(a.config);
  if (!a.output.empty()) lc.run.output_dir = a.output;
  ensure_dir(lc.run.output_dir);
  const unsigned threads = resolve_threads(a.threads);

  Provenance prov;
  prov.config_hash = lc.hash;
  ScalarField V0 = [&] {
    if (a.init == "constraint")
      return constraint_field(lc.grid, lc.system.constraint);
    ScalarField f = load_field_checked(a.init, *lc.grid, "--init field");
    prov.inputs["init"] = hash_hex(hash_field(f));
    return f;
  }();

  auto [V, stats] = solve_global(V0, lc.system.dynamics, lc.run.numerics,
                                 lc.run.convergence, threads);

  const std::string field_path = join_path(lc.run.output_dir, "solution.hjpf");
  save_field(V, field_path, field_metadata("solve", lc.hash));

  nlohmann::json report = make_report("solve", prov);
  report["system"] = lc.system.name;
  report["stats"] = stats_to_json(stats);
  write_report(report, join_path(lc.run.output_dir, "solve_report.json"));

  std::printf("solve: system=%s cells=%zu sweeps=%zu evals=%zu converged=%s\n",
              lc.system.name.c_str(), lc.grid->cell_count(), stats.sweeps,
              stats.hamiltonian_evals, stats.converged ? "yes" : "no");
  std::printf("solve: wall=%.3fs wrote %s\n", stats.wall_time,
              field_path.c_str());

  if (!stats.converged && !a.allow_partial) {
    std::fprintf(stderr,
                 "solve: no fixed point within %zu sweeps "
                 "(use --allow-partial to accept the best iterate)\n",
                 lc.run.convergence.max_sweeps);
    return kExitNumerical;
  }
  return kExitOk;
}

// --- patch ---------------------------------------------------------------

struct PatchArgs {
  std::string config;
  std::string init;
  std::string certified;
  std::string output;
  bool reconstruct_sdf = false;
  bool allow_partial = false;
  unsigned threads = 0;
};

int run_patch(const PatchArgs& a) {
  LoadedConfig lc = load_setup(a.config);
  if (!a.output.empty()) lc.run.output_dir = a.output;
  ensure_dir(lc.run.output_dir);
  const unsigned threads = resolve_threads(a.threads);

  Provenance prov;
  prov.config_hash = lc.hash;
  ScalarField h = load_field_checked(a.init, *lc.grid, "--init field");
  prov.inputs["init"] = hash_hex(hash_field(h));

  bool sdf_vacuous = false;
  if (a.reconstruct_sdf) {
    SdfResult sdf = signed_distance_reconstruct(h);
    h = std::move(sdf.field);
    sdf_vacuous = sdf.vacuous;
    if (sdf_vacuous)
      std::fprintf(stderr,
                   "patch: --reconstruct-sdf found no zero crossing; "
                   "input left unchanged\n");
  }

  std::vector<std::uint8_t> certified;
  if (!a.certified.empty()) {
    auto [mgrid, mask] = load_mask(a.certified);
    if (!(*mgrid == *lc.grid))
      throw ShapeMismatch("--certified mask '" + a.certified +
                          "' grid does not match the configured grid");
    certified = std::move(mask);
    prov.inputs["certified"] =
        hash_hex(fnv1a64(certified.data(), certified.size()));
  }

  PatchResult result = patch(h, certified, lc.system.dynamics, lc.run.patch,
                             lc.run.numerics, lc.run.convergence, threads);
  CertificateReport cert = invariance_certificate(
      result.field, lc.system.dynamics, result.resolved.zeta, lc.run.numerics,
      lc.run.convergence.tol);

  const std::string field_path = join_path(lc.run.output_dir, "patched.hjpf");
  save_field(result.field, field_path, field_metadata("patch", lc.hash));

  nlohmann::json report = make_report("patch", prov);
  report["system"] = lc.system.name;
  report["stats"] = stats_to_json(result.stats);
  report["resolved"] = {{"zeta", result.resolved.zeta},
                        {"pad_radius", result.resolved.pad_radius},
                        {"decrease_tol", result.resolved.decrease_tol}};
  if (a.reconstruct_sdf) report["sdf_vacuous"] = sdf_vacuous;
  nlohmann::json cj;
  cj["boundary_cells"] = cert.boundary_cells;
  cj["violation_count"] = cert.violations.size();
  nlohmann::json vlist = nlohmann::json::array();
  for (std::size_t i = 0; i < cert.violations.size() && i < 100; ++i)
    vlist.push_back({{"cell", cert.violations[i].flat},
                     {"hamiltonian", cert.violations[i].hamiltonian}});
  cj["violations"] = vlist;
  report["certificate"] = cj;
  write_report(report, join_path(lc.run.output_dir, "patch_report.json"));

  std::printf(
      "patch: system=%s iterations=%zu evals=%zu converged=%s zeta=%g\n",
      lc.system.name.c_str(), result.stats.sweeps,
      result.stats.hamiltonian_evals, result.stats.converged ? "yes" : "no",
      result.resolved.zeta);
  std::printf("patch: certificate boundary=%zu violations=%zu wall=%.3fs\n",
              cert.boundary_cells, cert.violations.size(),
              result.stats.wall_time);
  std::printf("patch: wrote %s\n", field_path.c_str());

  if (!result.stats.converged && !a.allow_partial) {
    std::fprintf(stderr,
                 "patch: active set still nonempty after %zu iterations\n",
                 result.resolved.max_iterations);
    return kExitNumerical;
  }
  if (!cert.certified()) {
    std::fprintf(stderr, "patch: invariance certificate failed at %zu cells\n",
                 cert.violations.size());
    return kExitCertificate;
  }
  return kExitOk;
}

// --- rollout -------------------------------------------------------------

struct RolloutArgs {
  std::string config;
  std::string field;
  std::size_t n = 100;
  double horizon = 10.0;
  double dt = 0.01;
  double margin = 0.0;
  bool unfiltered = false;
  std::string nominal = "constant:";
  std::string nominal_uref;
  std::string output;
};

Policy make_nominal(const std::string& spec, const BenchmarkSystem& sys,
                    const std::string& uref_text) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw ConfigError("--nominal must look like kind:v1,v2,... ");
  const std::string kind = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  const std::size_t n = sys.dynamics.state_dim();
  const std::size_t m = sys.dynamics.input_dim();
  if (kind == "constant") {
    std::vector<double> u =
        rest.empty() ? std::vector<double>(m, 0.0) : parse_doubles(rest);
    if (u.size() != m)
      throw ConfigError("--nominal constant needs " + std::to_string(m) +
                        " values");
    return Policy::constant(std::move(u));
  }
  if (kind == "goal") {
    std::vector<double> x_ref = parse_doubles(rest);
    if (x_ref.size() != n)
      throw ConfigError("--nominal goal needs " + std::to_string(n) +
                        " state values");
    std::vector<double> u_ref = uref_text.empty()
                                    ? std::vector<double>(m, 0.0)
                                    : parse_doubles(uref_text);
    if (u_ref.size() != m)
      throw ConfigError("--nominal-uref needs " + std::to_string(m) +
                        " values");
    std::vector<double> Q(n * n, 0.0), R(m * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) Q[i * n + i] = 1.0;
    for (std::size_t j = 0; j < m; ++j) R[j * m + j] = 1.0;
    return lqr_policy(sys.dynamics, std::move(x_ref), std::move(u_ref), Q, R);
  }
  throw ConfigError("unknown nominal policy kind '" + kind + "'");
}

int run_rollout(const RolloutArgs& a) {
  LoadedConfig lc = load_setup(a.config);
  if (!a.output.empty()) lc.run.output_dir = a.output;
  ensure_dir(lc.run.output_dir);
  if (a.n == 0) throw ConfigError("--n must be positive");
  if (a.dt <= 0.0 || a.horizon <= 0.0)
    throw ConfigError("--dt and --horizon must be positive");

  Provenance prov;
  prov.config_hash = lc.hash;
  ScalarField V = load_field_checked(a.field, *lc.grid, "--field");
  prov.inputs["field"] = hash_hex(hash_field(V));

  Policy nominal = make_nominal(a.nominal, lc.system, a.nominal_uref);
  auto starts = sample_safe_starts(V, a.n, a.margin, lc.run.seed);

  Timer timer;
  std::vector<Trajectory> batch;
  batch.reserve(a.n);
  for (const auto& x0 : starts)
    batch.push_back(rollout(V, lc.system.dynamics, lc.system.constraint,
                            nominal, x0, a.horizon, a.dt, lc.run.filter,
                            !a.unfiltered));
  RolloutMetrics metrics = evaluate_rollouts(batch);
  const double wall = timer.seconds();

  const std::size_t n = lc.system.dynamics.state_dim();
  const std::size_t m = lc.system.dynamics.input_dim();
  std::string header = "episode,t";
  for (std::size_t i = 0; i < n; ++i) header += ",x" + std::to_string(i);
  for (std::size_t j = 0; j < m; ++j) header += ",u" + std::to_string(j);
  header += ",h,safe,filter_active,clamped,diverged";
  std::vector<std::string> rows;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const Trajectory& tr = batch[e];
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      std::string row = std::to_string(e) + "," + format_double(tr.times[k]);
      for (double v : tr.states[k]) row += "," + format_double(v);
      for (double v : tr.controls[k]) row += "," + format_double(v);
      row += "," + format_double(tr.h_values[k]);
      row += "," + std::to_string(int(tr.safe_flags[k]));
      row += "," + std::to_string(int(tr.filter_active_flags[k]));
      row += "," + std::to_string(int(tr.clamped_flags[k]));
      row += "," + std::to_string(int(tr.diverged ? 1 : 0));
      rows.push_back(std::move(row));
    }
  }
  const std::string csv_path = join_path(lc.run.output_dir, "trajectories.csv");
  write_csv(csv_path, header, rows);

  nlohmann::json report = make_report("rollout", prov);
  report["system"] = lc.system.name;
  report["episodes"] = a.n;
  report["horizon"] = a.horizon;
  report["dt"] = a.dt;
  report["filtered"] = !a.unfiltered;
  report["metrics"] = {{"unsafe_state_share", metrics.unsafe_state_share},
                       {"unsafe_rollout_share", metrics.unsafe_rollout_share},
                       {"filter_activity", metrics.filter_activity},
                       {"clamped_state_share", metrics.clamped_state_share},
                       {"diverged_count", metrics.diverged_count},
                       {"mean_recovery_time", metrics.mean_recovery_time},
                       {"unsafe_episodes", metrics.unsafe_episodes}};
  write_report(report, join_path(lc.run.output_dir, "rollout_report.json"));

  std::printf(
      "rollout: episodes=%zu unsafe_rollouts=%.2f%% filter_active=%.2f%% "
      "diverged=%zu\n",
      a.n, metrics.unsafe_rollout_share, metrics.filter_activity,
      metrics.diverged_count);
  std::printf("rollout: wall=%.3fs wrote %s\n", wall, csv_path.c_str());
  return kExitOk;
}

// --- compare / contours ---------------------------------------------------

// Nearest-node 2-D slice through the field: axes (di, dj) stay free, every
// other axis is pinned to the node closest to its entry in fixed (ascending
// axis order).
ScalarField extract_slice(const ScalarField& f, std::size_t di, std::size_t dj,
                          const std::vector<double>& fixed) {
  const Grid& g = f.grid();
  const std::size_t dims = g.dims();
  if (di >= dims || dj >= dims || di == dj)
    throw ConfigError("--dims axes must be two distinct axes below " +
                      std::to_string(dims));
  if (fixed.size() + 2 != dims)
    throw ConfigError("--slice needs " + std::to_string(dims - 2) +
                      " values (one per pinned axis, ascending order)");

  std::vector<std::size_t> base(dims, 0);
  std::size_t next = 0;
  for (std::size_t ax = 0; ax < dims; ++ax) {
    if (ax == di || ax == dj) continue;
    const double v = fixed[next++];
    if (v < g.lo()[ax] || v > g.hi()[ax])
      throw OutOfDomain("slice value " + format_double(v) + " for axis " +
                        std::to_string(ax) + " lies outside [" +
                        format_double(g.lo()[ax]) + ", " +
                        format_double(g.hi()[ax]) + "]");
    base[ax] = static_cast<std::size_t>(
        std::llround((v - g.lo()[ax]) / g.spacing()[ax]));
  }

  GridPtr sg = make_grid({g.lo()[di], g.lo()[dj]}, {g.hi()[di], g.hi()[dj]},
                         {g.shape()[di], g.shape()[dj]});
  ScalarField out(sg);
  std::vector<std::size_t> idx = base;
  for (std::size_t i = 0; i < g.shape()[di]; ++i)
    for (std::size_t j = 0; j < g.shape()[dj]; ++j) {
      idx[di] = i;
      idx[dj] = j;
      out[sg->flatten(std::array<std::size_t, 2>{i, j})] = f[g.flatten(idx)];
    }
  return out;
}

void write_contour_csv(const ScalarField& slice, double level,
                       const std::string& path) {
  auto segments = marching_squares(slice, level);
  auto polylines =
      chain_polylines(segments, 1e-6 * slice.grid().min_spacing());
  std::vector<std::string> rows;
  for (std::size_t p = 0; p < polylines.size(); ++p)
    for (const auto& pt : polylines[p])
      rows.push_back(std::to_string(p) + "," + format_double(pt[0]) + "," +
                     format_double(pt[1]));
  write_csv(path, "polyline,x,y", rows);
}

struct CompareArgs {
  std::string a, b;
  std::string output = ".";
};

int run_compare(const CompareArgs& a) {
  ensure_dir(a.output);
  ScalarField fa = load_field(a.a);
  ScalarField fb = load_field(a.b);
  if (!(fa.grid() == fb.grid()))
    throw ShapeMismatch("compare: '" + a.a + "' and '" + a.b +
                        "' live on different grids");

  double max_diff = 0.0;
  std::size_t sym_diff = 0;
  for (std::size_t i = 0; i < fa.values().size(); ++i) {
    max_diff = std::max(max_diff, std::abs(fa[i] - fb[i]));
    if ((fa[i] >= 0.0) != (fb[i] >= 0.0)) ++sym_diff;
  }

  const Grid& g = fa.grid();
  std::vector<std::string> contour_files;
  if (g.dims() >= 2) {
    for (std::size_t di = 0; di < g.dims(); ++di)
      for (std::size_t dj = di + 1; dj < g.dims(); ++dj) {
        std::vector<double> fixed;
        for (std::size_t ax = 0; ax < g.dims(); ++ax)
          if (ax != di && ax != dj)
            fixed.push_back(0.5 * (g.lo()[ax] + g.hi()[ax]));
        const std::string suffix =
            std::to_string(di) + "_" + std::to_string(dj) + ".csv";
        for (auto [field, tag] : {std::pair{&fa, "a"}, std::pair{&fb, "b"}}) {
          const std::string name = std::string("contour_") + tag + "_" + suffix;
          write_contour_csv(extract_slice(*field, di, dj, fixed), 0.0,
                            join_path(a.output, name));
          contour_files.push_back(name);
        }
      }
  }

  Provenance prov;
  prov.config_hash = "none";
  prov.inputs["a"] = hash_hex(hash_field(fa));
  prov.inputs["b"] = hash_hex(hash_field(fb));
  nlohmann::json report = make_report("compare", prov);
  report["max_abs_diff"] = max_diff;
  report["superlevel_symmetric_difference"] = sym_diff;
  report["cells"] = fa.values().size();
  report["contour_files"] = contour_files;
  write_report(report, join_path(a.output, "compare_report.json"));

  std::printf("compare: max|a-b|=%.6g superlevel_symmetric_difference=%zu "
              "of %zu cells\n",
              max_diff, sym_diff, fa.values().size());
  return kExitOk;
}

struct ContoursArgs {
  std::string field;
  std::string dims = "0,1";
  std::string slice;
  double level = 0.0;
  std::string output = ".";
};

int run_contours(const ContoursArgs& a) {
  ensure_dir(a.output);
  ScalarField f = load_field(a.field);

  std::vector<double> axes = parse_doubles(a.dims);
  if (axes.size() != 2)
    throw ConfigError("--dims needs exactly two axis indices, e.g. 0,1");
  const auto di = static_cast<std::size_t>(axes[0]);
  const auto dj = static_cast<std::size_t>(axes[1]);
  std::vector<double> fixed =
      a.slice.empty() ? std::vector<double>{} : parse_doubles(a.slice);

  ScalarField slice = f.grid().dims() == 2 && di == 0 && dj == 1 && fixed.empty()
                          ? f
                          : extract_slice(f, di, dj, fixed);

  const Grid& sg = slice.grid();
  std::vector<std::string> rows;
  std::array<std::size_t, 2> idx{0, 0};
  for (idx[0] = 0; idx[0] < sg.shape()[0]; ++idx[0])
    for (idx[1] = 0; idx[1] < sg.shape()[1]; ++idx[1]) {
      double x[2];
      sg.state_of(idx, x);
      rows.push_back(format_double(x[0]) + "," + format_double(x[1]) + "," +
                     format_double(slice[sg.flatten(idx)]));
    }
  write_csv(join_path(a.output, "slice.csv"), "x,y,value", rows);
  write_contour_csv(slice, a.level, join_path(a.output, "contour.csv"));

  Provenance prov;
  prov.config_hash = "none";
  prov.inputs["field"] = hash_hex(hash_field(f));
  nlohmann::json report = make_report("contours", prov);
  report["axes"] = {di, dj};
  report["level"] = a.level;
  report["files"] = {"slice.csv", "contour.csv"};
  write_report(report, join_path(a.output, "contours_report.json"));

  std::printf("contours: wrote %s and %s\n",
              join_path(a.output, "slice.csv").c_str(),
              join_path(a.output, "contour.csv").c_str());
  return kExitOk;
}

// --- epsilon ---------------------------------------------------------------

struct EpsilonArgs {
  std::string config;
  std::string field;
  std::string output;
};

int run_epsilon(const EpsilonArgs& a) {
  LoadedConfig lc = load_setup(a.config);
  if (!a.output.empty()) lc.run.output_dir = a.output;
  ensure_dir(lc.run.output_dir);

  Provenance prov;
  prov.config_hash = lc.hash;
  ScalarField h = load_field_checked(a.field, *lc.grid, "--field");
  prov.inputs["field"] = hash_hex(hash_field(h));

  EpsilonReport er =
      measure_epsilon(h, lc.system.dynamics, lc.run.filter.gamma,
                      lc.run.numerics, lc.run.convergence.tol);

  nlohmann::json report = make_report("epsilon", prov);
  report["system"] = lc.system.name;
  report["gamma"] = lc.run.filter.gamma;
  report["epsilon"] = er.epsilon;
  report["boundary_cells"] = er.boundary_cells;
  report["violating_cells"] = er.violating_cells.size();
  report["vacuous"] = er.vacuous;
  write_report(report, join_path(lc.run.output_dir, "epsilon_report.json"));

  std::printf("epsilon: %.6g (%zu of %zu boundary cells violate%s)\n",
              er.epsilon, er.violating_cells.size(), er.boundary_cells,
              er.vacuous ? "; boundary empty" : "");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Grid-based safety value tools: global solver, local patcher, "
      "invariance certificate, safety filter rollouts"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  auto* solve = app.add_subcommand(
      "solve", "Sweep the full grid to the invariant fixed point");
  solve->add_option("--config", solve_args.config, "Run config (JSON)")
      ->required();
  solve->add_option("--init", solve_args.init,
                    "'constraint' or a field file to start from");
  solve->add_flag("--allow-partial", solve_args.allow_partial,
                  "Exit 0 even when max_sweeps hits before the fixed point");
  solve->add_option("--threads", solve_args.threads,
                    "Worker threads (default: HJPATCH_THREADS or hardware)");
  solve->add_option("--output", solve_args.output,
                    "Output directory (overrides the config's output_dir)");

  PatchArgs patch_args;
  auto* patch = app.add_subcommand(
      "patch", "Repair an almost-safe value function on its boundary band");
  patch->add_option("--config", patch_args.config, "Run config (JSON)")
      ->required();
  patch->add_option("--init", patch_args.init, "Field file to patch")
      ->required();
  patch->add_option("--certified", patch_args.certified,
                    "Mask file of cells to keep out of the active set");
  patch->add_flag("--reconstruct-sdf", patch_args.reconstruct_sdf,
                  "Rebuild the input as a signed distance field first");
  patch->add_flag("--allow-partial", patch_args.allow_partial,
                  "Exit 0 even when max_iterations hits first");
  patch->add_option("--threads", patch_args.threads,
                    "Worker threads (default: HJPATCH_THREADS or hardware)");
  patch->add_option("--output", patch_args.output,
                    "Output directory (overrides the config's output_dir)");

  RolloutArgs rollout_args;
  auto* rollout = app.add_subcommand(
      "rollout", "Closed-loop episodes through the safety filter");
  rollout->add_option("--config", rollout_args.config, "Run config (JSON)")
      ->required();
  rollout->add_option("--field", rollout_args.field, "Value function file")
      ->required();
  rollout->add_option("--n", rollout_args.n, "Episode count");
  rollout->add_option("--horizon", rollout_args.horizon, "Seconds per episode");
  rollout->add_option("--dt", rollout_args.dt, "Control period");
  rollout->add_option("--margin", rollout_args.margin,
                      "Start-state sampling threshold on the value");
  rollout->add_flag("--unfiltered", rollout_args.unfiltered,
                    "Run the nominal policy without the filter");
  rollout->add_option(
      "--nominal", rollout_args.nominal,
      "Nominal policy: constant:u1,..,um or goal:x1,..,xn (LQR)");
  rollout->add_option("--nominal-uref", rollout_args.nominal_uref,
                      "Equilibrium input for goal policies (default zeros)");
  rollout->add_option("--output", rollout_args.output,
                      "Output directory (overrides the config's output_dir)");

  CompareArgs compare_args;
  auto* compare = app.add_subcommand(
      "compare", "Field difference report plus per-projection contours");
  compare->add_option("--a", compare_args.a, "First field file")->required();
  compare->add_option("--b", compare_args.b, "Second field file")->required();
  compare->add_option("--output", compare_args.output, "Output directory");

  EpsilonArgs epsilon_args;
  auto* epsilon = app.add_subcommand(
      "epsilon", "Leak share of the claimed safe set's boundary");
  epsilon->add_option("--config", epsilon_args.config, "Run config (JSON)")
      ->required();
  epsilon->add_option("--field", epsilon_args.field, "Barrier field file")
      ->required();
  epsilon->add_option("--output", epsilon_args.output,
                      "Output directory (overrides the config's output_dir)");

  ContoursArgs contours_args;
  auto* contours = app.add_subcommand(
      "contours", "2-D slice values and zero-level polylines as CSV");
  contours->add_option("--field", contours_args.field, "Field file")
      ->required();
  contours->add_option("--dims", contours_args.dims,
                       "Free axis pair, e.g. 0,1");
  contours->add_option("--slice", contours_args.slice,
                       "Values pinning the remaining axes (ascending order)");
  contours->add_option("--level", contours_args.level, "Contour level");
  contours->add_option("--output", contours_args.output, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*solve) return run_solve(solve_args);
    if (*patch) return run_patch(patch_args);
    if (*rollout) return run_rollout(rollout_args);
    if (*compare) return run_compare(compare_args);
    if (*epsilon) return run_epsilon(epsilon_args);
    if (*contours) return run_contours(contours_args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const NonConvergence& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const NonFiniteValue& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitOk;
}
