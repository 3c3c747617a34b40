// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: synthetic media, frequency/partition sweeps, spectra
// of preconditioned interface systems and log-log scaling fits.

#ifndef NESTEDPT_BENCH_HPP
#define NESTEDPT_BENCH_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nestedpt/solver.hpp"

namespace nestedpt
{

// --- synthetic media -------------------------------------------------------------

enum class ModelKind
{
  constant,
  vertical_gradient,
  random_smooth,
  layered_inclusions
};

ModelKind parse_model_kind(const std::string &s);
std::string to_string(ModelKind k);

/// Gridded synthetic medium with speeds in [1, 4.5], deterministic per seed.
/// `value` is the speed of the constant kind.
VelocityModel synthetic_model(ModelKind kind, std::uint64_t seed, const Grid &grid,
                              double value = 1.0);

/// Lag (in nodes, along x) at which the normalized autocorrelation of the
/// interior speeds first drops below 1/e.
double correlation_length(const VelocityModel &m);

// --- experiment configuration ----------------------------------------------------

enum class FrequencyScaling
{
  fixed,   // frequencies used as given for every size
  linear,  // f ~ n: frequencies are for the first size, scaled by nx / nx0
  sqrt     // f ~ sqrt(n)
};

struct ModelSpec
{
  std::string path;  // model file; empty means synthetic
  ModelKind kind = ModelKind::constant;
  double value = 1.0;
  std::uint64_t seed = 1;
};

struct Partition
{
  int layers = 2;
  int cells = 0;
};

struct ExperimentConfig
{
  ModelSpec model;
  std::vector<std::pair<int, int>> sizes;  // (nx, nz); ignored for model files
  std::vector<double> frequencies;         // Hz, omega = 2 pi f
  FrequencyScaling scaling = FrequencyScaling::fixed;
  std::vector<Partition> partitions{{2, 0}};
  int npml = -1;  // -1 means max(10, ceil(log2 N))
  Scheme scheme = Scheme::fd;
  std::vector<Backend> backends{Backend::direct};
  std::vector<Preconditioner> preconditioners{Preconditioner::gs};
  std::vector<KrylovMethod> methods{KrylovMethod::gmres};
  double ktol = 1e-7;
  int max_iter = 200;
  double inner_tol = 1e-6;
  PlrOptions plr;
  std::uint64_t seed = 1;
  std::string output = "out";
  std::int64_t oracle_cap = 10000;
  bool timing = true;
  std::string artifact_dir;
  std::vector<nlohmann::json> spectrum;  // spectrum instances
};

ExperimentConfig parse_config(const nlohmann::json &j);
ExperimentConfig load_config(const std::filesystem::path &p);

// --- sweeps ----------------------------------------------------------------------

struct ResultRow
{
  std::string run_id;
  int nx = 0, nz = 0;
  std::int64_t N = 0;
  int npml = 0;
  double freq = 0.0, omega = 0.0;
  int layers = 0, cells = 0;
  std::string backend, precond, method;
  double iterations = 0.0;
  bool converged = false;
  double final_residual = 0.0;
  std::optional<double> error_vs_direct;
  std::uint64_t touches_per_iter = 0;
  double setup_s = 0.0, iter_s = 0.0, solve_s = 0.0;  // wall clock
  std::string status = "ok";
  std::vector<double> history;
};

using ResultTable = std::vector<ResultRow>;

/// Runs every (size, frequency, partition, backend, preconditioner, method)
/// combination. Failures are recorded per row.
ResultTable run_sweep(const ExperimentConfig &cfg);

/// Error bound for the oracle column: 10 x the effective tolerance.
double oracle_bound(const ExperimentConfig &cfg, const ResultRow &r);

void write_results_csv(const ResultTable &t, std::ostream &os);
ResultTable read_results_csv(std::istream &is);
/// results.csv plus residuals/<run_id>.csv under cfg.output.
void write_outputs(const ExperimentConfig &cfg, const ResultTable &t);

// --- spectra ---------------------------------------------------------------------

std::vector<cplx> eigenvalues(const CMatrix &A);
/// Fraction of eigenvalues within `radius` of 1.
double clustering_metric(const std::vector<cplx> &eig, double radius = 0.5);

struct SpectrumResult
{
  std::string name;
  Index dimension = 0;
  std::vector<cplx> gs, jac;
  double gs_metric = 0.0, jac_metric = 0.0;
};

inline constexpr Index kSpectrumCap = 4000;

/// Eigenvalues of the GS- and Jacobi-preconditioned polarized operator.
SpectrumResult dump_spectrum(const Problem &pb, int layers, const std::string &name);
/// Runs every spectrum instance in the config and writes spectrum/*.csv.
std::vector<SpectrumResult> run_spectra(const ExperimentConfig &cfg);

// --- scaling fits ----------------------------------------------------------------

struct ScalingFit
{
  std::string backend;
  int sizes = 0;
  double slope = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 95% Student t interval for the slope
  double intercept = 0.0;
  double level = 0.0;  // fitted y at the geometric mean of x over all backends
};

/// Least-squares fit of log y against log x; needs at least 3 distinct x.
ScalingFit fit_loglog(const std::vector<double> &x, const std::vector<double> &y,
                      double confidence = 0.95);

/// Per-backend fit of a table column against N. Requires >= 4 sizes each.
std::vector<ScalingFit> fit_scaling(const ResultTable &t, const std::string &column = "touches_per_iter");

bool intervals_overlap(const ScalingFit &a, const ScalingFit &b);

}  // namespace nestedpt

#endif  // NESTEDPT_BENCH_HPP
