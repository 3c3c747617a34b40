// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: solve, sweep, spectrum, fit.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nestedpt/bench.hpp"
#include "nestedpt/model_io.hpp"

namespace fs = std::filesystem;
using namespace nestedpt;

namespace
{

struct SolveArgs
{
  std::string model, synthetic = "constant", npml = "auto", precond = "gs", krylov = "gmres";
  std::string backend = "direct", scheme = "fd", out = "out", artifacts;
  std::vector<int> size{64, 64};
  std::vector<double> source;
  double freq = 1.0, tol = 1e-7, inner_tol = 1e-6, value = 1.0;
  int layers = 2, cells = 0, max_iter = 200;
  std::uint64_t seed = 1;
  bool plr = false;
  double plr_eps = 1e-8;
  int plr_rank = 0;
};

int run_solve(const SolveArgs &a)
{
  const int npml_fixed = a.npml == "auto" ? -1 : std::stoi(a.npml);
  std::shared_ptr<const VelocityModel> model;
  if (!a.model.empty())
  {
    VelocityModel m = load_model(a.model);
    const int npml = npml_fixed >= 0 ? npml_fixed
                                     : default_npml(std::int64_t(m.grid().nx) * m.grid().nz);
    model = std::make_shared<VelocityModel>(m.with_npml(npml));
  }
  else
  {
    const int nx = a.size.at(0), nz = a.size.at(1);
    const int npml = npml_fixed >= 0 ? npml_fixed : default_npml(std::int64_t(nx) * nz);
    model = std::make_shared<VelocityModel>(synthetic_model(
      parse_model_kind(a.synthetic), a.seed, Grid::make(nx, nz, 1.0 / (nx + 1), npml), a.value));
  }
  if (a.scheme != "fd" && a.scheme != "q1")
  {
    throw ConfigError("scheme must be fd or q1");
  }
  const Problem pb = Problem::make(model, 2.0 * std::numbers::pi * a.freq,
                                   a.scheme == "fd" ? Scheme::fd : Scheme::q1);
  SolverOptions o;
  o.layers = a.layers;
  o.cells = a.cells;
  o.backend = parse_backend(a.backend);
  o.prec = parse_preconditioner(a.precond);
  o.krylov = KrylovConfig{parse_krylov_method(a.krylov), a.tol, a.max_iter, 0};
  o.inner_tol = a.inner_tol;
  o.plr.enabled = a.plr;
  o.plr.eps = a.plr_eps;
  o.plr.max_rank = a.plr_rank;
  o.artifact_dir = a.artifacts;

  const Grid &g = pb.grid;
  const int sp = a.source.size() == 2 ? int(std::lround(a.source[0] / g.h)) : (g.nx + 1) / 2;
  const int sq = a.source.size() == 2 ? int(std::lround(a.source[1] / g.h)) : std::max(1, g.nz / 8);
  const CVector rhs = delta_source(pb, global_patch(pb), sp, sq);

  const Solver solver(pb, o);
  const SolveReport rep = solver.solve(rhs);

  fs::create_directories(a.out);
  save_wavefield(fs::path(a.out) / "wavefield.json", g, rep.u);
  {
    std::ofstream os(fs::path(a.out) / "residuals.csv");
    os << "iteration,residual\n";
    const double step = o.krylov.method == KrylovMethod::bicgstab ? 0.5 : 1.0;
    for (std::size_t i = 0; i < rep.krylov.history.size(); ++i)
    {
      os << step * double(i) << ',' << std::setprecision(10) << rep.krylov.history[i] << '\n';
    }
  }
  const nlohmann::json summary = {{"nx", g.nx},
                                  {"nz", g.nz},
                                  {"npml", g.npml},
                                  {"freq", a.freq},
                                  {"layers", o.layers},
                                  {"cells", o.cells > 0 ? o.cells : o.layers},
                                  {"backend", to_string(o.backend)},
                                  {"precond", to_string(o.prec)},
                                  {"krylov", to_string(o.krylov.method)},
                                  {"iterations", rep.krylov.iterations},
                                  {"final_residual", rep.krylov.history.empty() ? 0.0 : rep.krylov.history.back()},
                                  {"touches", rep.touches},
                                  {"setup_s", solver.setup_seconds()},
                                  {"solve_s", rep.seconds},
                                  {"artifacts_reused", solver.loaded_from_cache()}};
  std::ofstream(fs::path(a.out) / "summary.json") << summary.dump(2) << '\n';
  std::cout << "converged in " << rep.krylov.iterations << " iterations (residual "
            << summary["final_residual"].get<double>() << "), setup " << solver.setup_seconds()
            << " s, solve " << rep.seconds << " s; wrote " << a.out << "\n";
  return 0;
}

int run_sweep_cmd(const std::string &config)
{
  const ExperimentConfig cfg = load_config(config);
  const ResultTable t = run_sweep(cfg);
  write_outputs(cfg, t);
  int mismatches = 0, failures = 0;
  for (const ResultRow &r : t)
  {
    std::ostringstream err;
    if (r.error_vs_direct)
    {
      err << std::setprecision(3) << *r.error_vs_direct;
    }
    std::cout << std::left << std::setw(56) << r.run_id << " it=" << std::setw(6) << r.iterations
              << " err=" << std::setw(10) << (r.error_vs_direct ? err.str() : "-") << " " << r.status
              << "\n";
    mismatches += r.status == "oracle-mismatch" ? 1 : 0;
    failures += r.status.rfind("error", 0) == 0 ? 1 : 0;
  }
  std::cout << t.size() << " rows, " << failures << " failed, " << mismatches
            << " over the oracle bound; wrote " << (fs::path(cfg.output) / "results.csv").string()
            << "\n";
  return mismatches > 0 ? 3 : 0;
}

int run_spectrum_cmd(const std::string &config)
{
  const ExperimentConfig cfg = load_config(config);
  const auto res = run_spectra(cfg);
  for (const SpectrumResult &r : res)
  {
    std::cout << r.name << ": dimension " << r.dimension << ", GS clustering " << r.gs_metric
              << ", Jacobi clustering " << r.jac_metric << "\n";
  }
  return 0;
}

int run_fit_cmd(const std::string &table, const std::string &column)
{
  std::ifstream in(table);
  if (!in)
  {
    throw ConfigError("cannot open " + table);
  }
  const auto fits = fit_scaling(read_results_csv(in), column);
  std::cout << "backend,sizes,slope,ci_low,ci_high,level\n";
  for (const ScalingFit &f : fits)
  {
    std::cout << f.backend << ',' << f.sizes << ',' << f.slope << ',' << f.ci_low << ','
              << f.ci_high << ',' << f.level << '\n';
  }
  for (std::size_t i = 0; i < fits.size(); ++i)
  {
    for (std::size_t j = i + 1; j < fits.size(); ++j)
    {
      std::cout << "# " << fits[i].backend << " vs " << fits[j].backend << ": slope intervals "
                << (intervals_overlap(fits[i], fits[j]) ? "overlap" : "do not overlap") << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Nested polarized-traces Helmholtz solver"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto *solve = app.add_subcommand("solve", "Solve one point-source problem");
  solve->add_option("--model", sa.model, "Model header (.json) or tiny CSV model");
  solve->add_option("--synthetic", sa.synthetic, "Synthetic model kind when --model is absent");
  solve->add_option("--size", sa.size, "Synthetic grid nx nz")->expected(2);
  solve->add_option("--seed", sa.seed, "Synthetic model seed");
  solve->add_option("--value", sa.value, "Speed of the constant synthetic model");
  solve->add_option("--freq", sa.freq, "Frequency f = omega / (2 pi)")->required();
  solve->add_option("--layers", sa.layers, "Number of layers L");
  solve->add_option("--cells", sa.cells, "Cells per layer for nested backends (0: L)");
  solve->add_option("--npml", sa.npml, "PML nodes per side or 'auto'");
  solve->add_option("--precond", sa.precond, "gs | jac | none");
  solve->add_option("--krylov", sa.krylov, "gmres | bicgstab");
  solve->add_option("--tol", sa.tol, "Outer Krylov tolerance");
  solve->add_option("--max-iter", sa.max_iter, "Outer iteration cap");
  solve->add_option("--inner-tol", sa.inner_tol, "Inner tolerance for nested-pt");
  solve->add_option("--backend", sa.backend, "direct | nested-pt | nested-lu");
  solve->add_option("--scheme", sa.scheme, "fd | q1");
  solve->add_option("--source", sa.source, "Source position x z (default: centre, near the top)")
    ->expected(2);
  solve->add_flag("--plr", sa.plr, "Compress interface operators");
  solve->add_option("--plr-eps", sa.plr_eps, "PLR accuracy");
  solve->add_option("--plr-rank", sa.plr_rank, "PLR max rank (0: ceil(sqrt(omega)))");
  solve->add_option("--artifacts", sa.artifacts, "Directory for offline Green block artifacts");
  solve->add_option("--out", sa.out, "Output directory");

  std::string config, table, column = "touches_per_iter";
  auto *sweep = app.add_subcommand("sweep", "Run a frequency/partition sweep");
  sweep->add_option("--config", config, "Experiment config (JSON)")->required();
  auto *spectrum = app.add_subcommand("spectrum", "Eigenvalues of preconditioned systems");
  spectrum->add_option("--config", config, "Experiment config with spectrum instances")->required();
  auto *fit = app.add_subcommand("fit", "Log-log scaling fits of a results table");
  fit->add_option("--table", table, "results.csv from a sweep")->required();
  fit->add_option("--column", column, "touches_per_iter | iter_s | iterations");

  CLI11_PARSE(app, argc, argv);
  try
  {
    if (*solve)
    {
      return run_solve(sa);
    }
    if (*sweep)
    {
      return run_sweep_cmd(config);
    }
    if (*spectrum)
    {
      return run_spectrum_cmd(config);
    }
    return run_fit_cmd(table, column);
  }
  catch (const ConfigError &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
