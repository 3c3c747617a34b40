// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <lapacke.h>

#include "nestedpt/model_io.hpp"

namespace nestedpt
{

namespace fs = std::filesystem;
using nlohmann::json;

// --- synthetic media -------------------------------------------------------------

ModelKind parse_model_kind(const std::string &s)
{
  if (s == "constant")
  {
    return ModelKind::constant;
  }
  if (s == "vertical-gradient")
  {
    return ModelKind::vertical_gradient;
  }
  if (s == "random-smooth")
  {
    return ModelKind::random_smooth;
  }
  if (s == "layered-inclusions")
  {
    return ModelKind::layered_inclusions;
  }
  throw ConfigError("unknown synthetic model '" + s +
                    "' (constant, vertical-gradient, random-smooth, layered-inclusions)");
}

std::string to_string(ModelKind k)
{
  switch (k)
  {
  case ModelKind::constant:
    return "constant";
  case ModelKind::vertical_gradient:
    return "vertical-gradient";
  case ModelKind::random_smooth:
    return "random-smooth";
  case ModelKind::layered_inclusions:
    return "layered-inclusions";
  }
  return "?";
}

namespace
{

constexpr double kMinSpeed = 1.0, kMaxSpeed = 4.5;

// Separable Gaussian smoothing (std `s` nodes) of white noise, normalized to
// zero mean and unit variance.
std::vector<double> smooth_noise(int nx, int nz, double s, std::mt19937_64 &rng)
{
  std::normal_distribution<double> d;
  std::vector<double> w(std::size_t(nx) * std::size_t(nz));
  for (double &v : w)
  {
    v = d(rng);
  }
  const int r = int(std::ceil(3 * s));
  std::vector<double> k(std::size_t(2 * r + 1));
  for (int i = -r; i <= r; ++i)
  {
    k[std::size_t(i + r)] = std::exp(-0.5 * i * i / (s * s));
  }
  auto pass = [&](std::vector<double> &f, bool along_x) {
    std::vector<double> g(f.size(), 0.0);
    for (int q = 0; q < nz; ++q)
    {
      for (int p = 0; p < nx; ++p)
      {
        double acc = 0.0, wsum = 0.0;
        for (int i = -r; i <= r; ++i)
        {
          const int pp = along_x ? p + i : p, qq = along_x ? q : q + i;
          if (pp < 0 || pp >= nx || qq < 0 || qq >= nz)
          {
            continue;
          }
          acc += k[std::size_t(i + r)] * f[std::size_t(qq) * std::size_t(nx) + std::size_t(pp)];
          wsum += k[std::size_t(i + r)] * k[std::size_t(i + r)];
        }
        g[std::size_t(q) * std::size_t(nx) + std::size_t(p)] = acc / std::sqrt(wsum);
      }
    }
    f.swap(g);
  };
  pass(w, true);
  pass(w, false);
  double mean = 0.0, var = 0.0;
  for (double v : w)
  {
    mean += v;
  }
  mean /= double(w.size());
  for (double v : w)
  {
    var += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(var / double(w.size()));
  for (double &v : w)
  {
    v = (v - mean) / (sd > 0 ? sd : 1.0);
  }
  return w;
}

}  // namespace

VelocityModel synthetic_model(ModelKind kind, std::uint64_t seed, const Grid &grid, double value)
{
  const int nx = grid.nx, nz = grid.nz;
  const double h = grid.h, Lx = (nx + 1) * h, Lz = (nz + 1) * h;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> c(std::size_t(nx) * std::size_t(nz));
  auto at = [&](int p, int q) -> double & {
    return c[std::size_t(q - 1) * std::size_t(nx) + std::size_t(p - 1)];
  };

  switch (kind)
  {
  case ModelKind::constant:
    if (value < kMinSpeed || value > kMaxSpeed)
    {
      throw ConfigError("constant speed must lie in [1, 4.5]");
    }
    std::fill(c.begin(), c.end(), value);
    break;
  case ModelKind::vertical_gradient:
  {
    const double top = 1.5 + 0.25 * U(rng), bottom = 4.0 + 0.25 * U(rng);
    for (int q = 1; q <= nz; ++q)
    {
      for (int p = 1; p <= nx; ++p)
      {
        at(p, q) = top + (bottom - top) * (q * h) / Lz;
      }
    }
    break;
  }
  case ModelKind::random_smooth:
  {
    const std::vector<double> w = smooth_noise(nx, nz, 4.0, rng);
    for (std::size_t i = 0; i < c.size(); ++i)
    {
      c[i] = std::clamp(2.5 + 0.6 * w[i], kMinSpeed, kMaxSpeed);
    }
    break;
  }
  case ModelKind::layered_inclusions:
  {
    // Three tilted layers, a fast body and a slow lens.
    const double z1 = (0.30 + 0.04 * U(rng)) * Lz, z2 = (0.62 + 0.04 * U(rng)) * Lz;
    const double tilt = 0.08 * U(rng);
    const double speeds[3] = {1.5 + 0.1 * U(rng), 2.4 + 0.1 * U(rng), 3.3 + 0.1 * U(rng)};
    const double bx = (0.35 + 0.05 * U(rng)) * Lx, bz = (0.45 + 0.05 * U(rng)) * Lz;
    const double brx = 0.14 * Lx, brz = 0.10 * Lz;
    const double lx = (0.72 + 0.05 * U(rng)) * Lx, lz = (0.78 + 0.04 * U(rng)) * Lz;
    const double lr = 0.08 * std::min(Lx, Lz);
    for (int q = 1; q <= nz; ++q)
    {
      for (int p = 1; p <= nx; ++p)
      {
        const double x = p * h, z = q * h;
        const double zt = z + tilt * (x - 0.5 * Lx);
        double v = zt < z1 ? speeds[0] : zt < z2 ? speeds[1] : speeds[2];
        const double ex = (x - bx) / brx, ez = (z - bz) / brz;
        if (ex * ex + ez * ez < 1.0)
        {
          v = kMaxSpeed;
        }
        if ((x - lx) * (x - lx) + (z - lz) * (z - lz) < lr * lr)
        {
          v = kMinSpeed;
        }
        at(p, q) = v;
      }
    }
    break;
  }
  }
  const VelocityModel inner(Grid::make(nx, nz, h, 0), std::move(c));
  return inner.with_npml(grid.npml);
}

double correlation_length(const VelocityModel &m)
{
  const Grid &g = m.grid();
  double mean = 0.0;
  for (int q = 1; q <= g.nz; ++q)
  {
    for (int p = 1; p <= g.nx; ++p)
    {
      mean += m.speed(p, q);
    }
  }
  mean /= double(g.nx) * g.nz;
  auto corr = [&](int lag) {
    double num = 0.0, den = 0.0;
    for (int q = 1; q <= g.nz; ++q)
    {
      for (int p = 1; p + lag <= g.nx; ++p)
      {
        num += (m.speed(p, q) - mean) * (m.speed(p + lag, q) - mean);
        den += (m.speed(p, q) - mean) * (m.speed(p, q) - mean);
      }
    }
    return den > 0 ? num / den : 1.0;
  };
  const double target = std::exp(-1.0);
  double prev = 1.0;
  for (int lag = 1; lag < g.nx; ++lag)
  {
    const double r = corr(lag);
    if (r < target)
    {
      return lag - 1 + (prev - target) / (prev - r);
    }
    prev = r;
  }
  return double(g.nx);
}

// --- configuration ---------------------------------------------------------------

namespace
{

Scheme parse_scheme(const std::string &s)
{
  if (s == "fd")
  {
    return Scheme::fd;
  }
  if (s == "q1")
  {
    return Scheme::q1;
  }
  throw ConfigError("unknown scheme '" + s + "' (fd, q1)");
}

std::string scheme_name(Scheme s) { return s == Scheme::fd ? "fd" : "q1"; }

template <class T, class F>
std::vector<T> parse_list(const json &j, const char *key, F parse, std::vector<T> fallback)
{
  if (!j.contains(key))
  {
    return fallback;
  }
  std::vector<T> out;
  for (const auto &e : j.at(key))
  {
    out.push_back(parse(e.get<std::string>()));
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const json &j)
{
  ExperimentConfig c;
  try
  {
    const json &m = j.at("model");
    if (m.contains("path"))
    {
      c.model.path = m.at("path").get<std::string>();
    }
    else
    {
      c.model.kind = parse_model_kind(m.value("synthetic", "constant"));
      c.model.value = m.value("value", 1.0);
      c.model.seed = m.value("seed", std::uint64_t(1));
    }
    for (const auto &s : j.value("sizes", json::array()))
    {
      c.sizes.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
    }
    c.frequencies = j.value("frequencies", std::vector<double>{});
    const std::string sc = j.value("frequency_scaling", "fixed");
    c.scaling = sc == "fixed"    ? FrequencyScaling::fixed
                : sc == "n"      ? FrequencyScaling::linear
                : sc == "sqrt_n" ? FrequencyScaling::sqrt
                                 : throw ConfigError("frequency_scaling must be fixed, n or sqrt_n");
    if (j.contains("partitions"))
    {
      c.partitions.clear();
      for (const auto &p : j.at("partitions"))
      {
        c.partitions.push_back({p.at(0).get<int>(), p.size() > 1 ? p.at(1).get<int>() : 0});
      }
    }
    if (j.contains("npml") && !j.at("npml").is_string())
    {
      c.npml = j.at("npml").get<int>();
    }
    else if (j.contains("npml") && j.at("npml").get<std::string>() != "auto")
    {
      throw ConfigError("npml must be an integer or \"auto\"");
    }
    c.scheme = parse_scheme(j.value("scheme", "fd"));
    c.backends = parse_list<Backend>(j, "backends", parse_backend, c.backends);
    c.preconditioners =
      parse_list<Preconditioner>(j, "preconditioners", parse_preconditioner, c.preconditioners);
    c.methods = parse_list<KrylovMethod>(j, "methods", parse_krylov_method, c.methods);
    c.ktol = j.value("ktol", c.ktol);
    c.max_iter = j.value("max_iter", c.max_iter);
    c.inner_tol = j.value("inner_tol", c.inner_tol);
    if (j.contains("plr"))
    {
      const json &p = j.at("plr");
      c.plr.enabled = p.value("enabled", true);
      c.plr.eps = p.value("eps", c.plr.eps);
      c.plr.max_rank = p.value("max_rank", c.plr.max_rank);
      c.plr.threshold = p.value("threshold", c.plr.threshold);
      c.plr.min_leaf = p.value("min_leaf", c.plr.min_leaf);
    }
    c.seed = j.value("seed", c.seed);
    c.plr.seed = c.seed;
    c.output = j.value("output", c.output);
    c.oracle_cap = j.value("oracle_cap", c.oracle_cap);
    c.timing = j.value("timing", c.timing);
    c.artifact_dir = j.value("artifacts", std::string{});
    for (const auto &s : j.value("spectrum", json::array()))
    {
      c.spectrum.push_back(s);
    }
  }
  catch (const json::exception &e)
  {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  if (c.model.path.empty() && c.sizes.empty() && !c.frequencies.empty())
  {
    throw ConfigError("synthetic experiments need a sizes list");
  }
  for (const Partition &p : c.partitions)
  {
    if (p.layers < 1 || p.cells < 0)
    {
      throw ConfigError("partition entries must be [L, Lc] with L >= 1");
    }
  }
  return c;
}

ExperimentConfig load_config(const fs::path &p)
{
  std::ifstream in(p);
  if (!in)
  {
    throw ConfigError("cannot open config " + p.string());
  }
  json j;
  try
  {
    j = json::parse(in);
  }
  catch (const json::exception &e)
  {
    throw ConfigError("config " + p.string() + ": " + e.what());
  }
  ExperimentConfig c = parse_config(j);
  // Relative model paths resolve against the config's directory.
  if (!c.model.path.empty() && fs::path(c.model.path).is_relative())
  {
    c.model.path = (p.parent_path() / c.model.path).string();
  }
  return c;
}

// --- sweeps ----------------------------------------------------------------------

namespace
{

std::shared_ptr<const VelocityModel> model_for(const ExperimentConfig &cfg, int nx, int nz)
{
  if (!cfg.model.path.empty())
  {
    VelocityModel m = load_model(cfg.model.path);
    const int npml = cfg.npml >= 0 ? cfg.npml : default_npml(std::int64_t(m.grid().nx) * m.grid().nz);
    return std::make_shared<VelocityModel>(m.with_npml(npml));
  }
  const int npml = cfg.npml >= 0 ? cfg.npml : default_npml(std::int64_t(nx) * nz);
  const Grid g = Grid::make(nx, nz, 1.0 / (nx + 1), npml);
  return std::make_shared<VelocityModel>(synthetic_model(cfg.model.kind, cfg.model.seed, g, cfg.model.value));
}

double scaled_frequency(const ExperimentConfig &cfg, double f, int nx)
{
  const double r = cfg.sizes.empty() ? 1.0 : double(nx) / cfg.sizes.front().first;
  switch (cfg.scaling)
  {
  case FrequencyScaling::linear:
    return f * r;
  case FrequencyScaling::sqrt:
    return f * std::sqrt(r);
  default:
    return f;
  }
}

std::string clean(std::string s)
{
  for (char &ch : s)
  {
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"')
    {
      ch = ';';
    }
  }
  return s;
}

std::string fmt(double v)
{
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

double oracle_bound(const ExperimentConfig &cfg, const ResultRow &r)
{
  const double tol = r.backend == "direct" ? cfg.ktol : std::max(cfg.ktol, cfg.inner_tol);
  return 10.0 * tol;
}

ResultTable run_sweep(const ExperimentConfig &cfg)
{
  ResultTable table;
  if (cfg.frequencies.empty())
  {
    return table;
  }
  std::vector<std::pair<int, int>> sizes = cfg.sizes;
  if (!cfg.model.path.empty())
  {
    const VelocityModel m = load_model(cfg.model.path);
    sizes = {{m.grid().nx, m.grid().nz}};
  }
  for (const auto &[nx, nz] : sizes)
  {
    for (double f0 : cfg.frequencies)
    {
      const double f = scaled_frequency(cfg, f0, nx);
      ResultRow base;
      base.nx = nx;
      base.nz = nz;
      base.N = std::int64_t(nx) * nz;
      base.freq = f;
      base.omega = 2.0 * std::numbers::pi * f;
      std::shared_ptr<const VelocityModel> model;
      Problem pb;
      CVector rhs, ref;
      try
      {
        model = model_for(cfg, nx, nz);
        base.npml = model->grid().npml;
        pb = Problem::make(model, base.omega, cfg.scheme);
        const Patch gp = global_patch(pb);
        rhs = delta_source(pb, gp, (nx + 1) / 2, std::max(1, nz / 8));
        if (base.N <= cfg.oracle_cap)
        {
          ref = solve_global(pb, rhs);
        }
      }
      catch (const std::exception &e)
      {
        ResultRow r = base;
        r.status = "error: " + clean(e.what());
        table.push_back(r);
        continue;
      }
      for (const Partition &part : cfg.partitions)
      {
        for (Backend b : cfg.backends)
        {
          ResultRow pbase = base;
          pbase.layers = part.layers;
          pbase.cells = b == Backend::direct ? 1 : (part.cells > 0 ? part.cells : part.layers);
          pbase.backend = to_string(b);
          std::unique_ptr<Solver> solver;
          try
          {
            SolverOptions so;
            so.layers = part.layers;
            so.cells = part.cells;
            so.backend = b;
            so.inner_tol = cfg.inner_tol;
            so.plr = cfg.plr;
            so.artifact_dir = cfg.artifact_dir;
            solver = std::make_unique<Solver>(pb, so);
          }
          catch (const std::exception &e)
          {
            for (Preconditioner p : cfg.preconditioners)
            {
              for (KrylovMethod m : cfg.methods)
              {
                ResultRow r = pbase;
                r.precond = to_string(p);
                r.method = to_string(m);
                r.status = "error: " + clean(e.what());
                table.push_back(r);
              }
            }
            continue;
          }
          for (Preconditioner p : cfg.preconditioners)
          {
            for (KrylovMethod m : cfg.methods)
            {
              ResultRow r = pbase;
              r.precond = to_string(p);
              r.method = to_string(m);
              std::ostringstream id;
              id << nx << "x" << nz << "_f" << fmt(f) << "_L" << r.layers << "x" << r.cells << "_"
                 << r.backend << "_" << r.precond << "_" << r.method;
              r.run_id = id.str();
              r.setup_s = solver->setup_seconds();
              try
              {
                const KrylovConfig kc{m, cfg.ktol, cfg.max_iter, 0};
                const SolveReport rep = solver->solve(rhs, p, kc);
                r.iterations = rep.krylov.iterations;
                r.converged = true;
                r.history = rep.krylov.history;
                r.final_residual = r.history.empty() ? 0.0 : r.history.back();
                r.solve_s = rep.seconds;
                if (ref.size() > 0)
                {
                  r.error_vs_direct = (rep.u - ref).norm() / ref.norm();
                  if (*r.error_vs_direct > oracle_bound(cfg, r))
                  {
                    r.status = "oracle-mismatch";
                  }
                }
              }
              catch (const KrylovError &e)
              {
                r.history = e.history();
                const double steps = double(r.history.size()) - 1.0;
                r.iterations = m == KrylovMethod::bicgstab ? 0.5 * steps : steps;
                r.final_residual = r.history.empty() ? 1.0 : r.history.back();
                r.status = "not-converged";
              }
              catch (const std::exception &e)
              {
                r.status = "error: " + clean(e.what());
              }
              try
              {
                r.touches_per_iter = solver->touches_per_iteration(p);
                if (cfg.timing)
                {
                  r.iter_s = solver->seconds_per_iteration(p, 5, 1);
                }
              }
              catch (const std::exception &e)
              {
                if (r.status == "ok")
                {
                  r.status = "error: " + clean(e.what());
                }
              }
              table.push_back(std::move(r));
            }
          }
        }
      }
    }
  }
  return table;
}

namespace
{

const std::vector<std::string> kColumns = {
  "run_id",   "nx",        "nz",         "N",         "npml",           "freq",
  "omega",    "L",         "Lc",         "backend",   "precond",        "method",
  "iterations", "converged", "final_residual", "error_vs_direct", "touches_per_iter",
  "setup_s",  "iter_s",    "solve_s",    "status"};

std::vector<std::string> split_csv(const std::string &line)
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ','))
  {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',')
  {
    out.emplace_back();
  }
  return out;
}

}  // namespace

void write_results_csv(const ResultTable &t, std::ostream &os)
{
  for (std::size_t i = 0; i < kColumns.size(); ++i)
  {
    os << (i ? "," : "") << kColumns[i];
  }
  os << '\n';
  for (const ResultRow &r : t)
  {
    os << r.run_id << ',' << r.nx << ',' << r.nz << ',' << r.N << ',' << r.npml << ','
       << fmt(r.freq) << ',' << fmt(r.omega) << ',' << r.layers << ',' << r.cells << ','
       << r.backend << ',' << r.precond << ',' << r.method << ',' << fmt(r.iterations) << ','
       << (r.converged ? 1 : 0) << ',' << fmt(r.final_residual) << ','
       << (r.error_vs_direct ? fmt(*r.error_vs_direct) : std::string{}) << ','
       << r.touches_per_iter << ',' << fmt(r.setup_s) << ',' << fmt(r.iter_s) << ','
       << fmt(r.solve_s) << ',' << r.status << '\n';
  }
}

ResultTable read_results_csv(std::istream &is)
{
  std::string line;
  if (!std::getline(is, line))
  {
    throw ConfigError("empty results table");
  }
  const std::vector<std::string> head = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < head.size(); ++i)
  {
    col[head[i]] = i;
  }
  for (const char *need : {"N", "backend", "touches_per_iter"})
  {
    if (!col.count(need))
    {
      throw ConfigError(std::string("results table lacks column ") + need);
    }
  }
  ResultTable t;
  while (std::getline(is, line))
  {
    if (line.empty())
    {
      continue;
    }
    const std::vector<std::string> v = split_csv(line);
    auto get = [&](const char *k) -> std::string {
      const auto it = col.find(k);
      return it == col.end() || it->second >= v.size() ? std::string{} : v[it->second];
    };
    auto num = [&](const char *k) {
      const std::string s = get(k);
      return s.empty() ? 0.0 : std::stod(s);
    };
    ResultRow r;
    r.run_id = get("run_id");
    r.nx = int(num("nx"));
    r.nz = int(num("nz"));
    r.N = std::int64_t(num("N"));
    r.npml = int(num("npml"));
    r.freq = num("freq");
    r.omega = num("omega");
    r.layers = int(num("L"));
    r.cells = int(num("Lc"));
    r.backend = get("backend");
    r.precond = get("precond");
    r.method = get("method");
    r.iterations = num("iterations");
    r.converged = num("converged") != 0.0;
    r.final_residual = num("final_residual");
    if (!get("error_vs_direct").empty())
    {
      r.error_vs_direct = num("error_vs_direct");
    }
    r.touches_per_iter = std::uint64_t(num("touches_per_iter"));
    r.setup_s = num("setup_s");
    r.iter_s = num("iter_s");
    r.solve_s = num("solve_s");
    r.status = col.count("status") ? get("status") : "ok";
    t.push_back(std::move(r));
  }
  return t;
}

void write_outputs(const ExperimentConfig &cfg, const ResultTable &t)
{
  const fs::path out = cfg.output;
  fs::create_directories(out / "residuals");
  {
    std::ofstream os(out / "results.csv");
    write_results_csv(t, os);
  }
  for (const ResultRow &r : t)
  {
    if (r.run_id.empty() || r.history.empty())
    {
      continue;
    }
    std::ofstream os(out / "residuals" / (r.run_id + ".csv"));
    os << "iteration,residual\n";
    const double step = r.method == "bicgstab" ? 0.5 : 1.0;
    for (std::size_t i = 0; i < r.history.size(); ++i)
    {
      os << fmt(step * double(i)) << ',' << fmt(r.history[i]) << '\n';
    }
  }
  json meta = {{"columns", kColumns},
               {"iteration_accounting", "BiCGStab counts each half step as 0.5"},
               {"oracle_cap", cfg.oracle_cap},
               {"scheme", scheme_name(cfg.scheme)},
               {"stiffness_gauss_points", Q1Options{}.stiffness_gauss},
               {"timing", "median of 5 outer iterations after 1 warm-up; wall clock"}};
  std::ofstream(out / "metadata.json") << meta.dump(2) << '\n';
}

// --- spectra ---------------------------------------------------------------------

std::vector<cplx> eigenvalues(const CMatrix &A)
{
  if (A.rows() != A.cols())
  {
    throw ConfigError("eigenvalues need a square matrix");
  }
  CMatrix work = A;
  const auto n = lapack_int(A.rows());
  std::vector<cplx> out(static_cast<std::size_t>(n));
  if (n == 0)
  {
    return out;
  }
  const lapack_int info =
    LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, reinterpret_cast<lapack_complex_double *>(work.data()),
                  n, reinterpret_cast<lapack_complex_double *>(out.data()), nullptr, 1, nullptr, 1);
  if (info != 0)
  {
    throw NumericalError("eigenvalue iteration did not converge (zgeev info " +
                         std::to_string(info) + ")");
  }
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

double clustering_metric(const std::vector<cplx> &eig, double radius)
{
  if (eig.empty())
  {
    return 0.0;
  }
  const auto n = std::count_if(eig.begin(), eig.end(),
                               [&](cplx l) { return std::abs(l - 1.0) < radius; });
  return double(n) / double(eig.size());
}

SpectrumResult dump_spectrum(const Problem &pb, int layers, const std::string &name)
{
  const LayerPartition part = partition_layers(pb.grid, layers);
  SpectrumResult r;
  r.name = name;
  r.dimension = TraceLayout{layers, Index(pb.grid.nxe())}.polarized_size();
  if (r.dimension > kSpectrumCap)
  {
    throw ConfigError("spectrum instance '" + name + "' has dimension " +
                      std::to_string(r.dimension) + ", over the cap of " +
                      std::to_string(kSpectrumCap));
  }
  std::vector<GreenBlockSet> sets;
  for (const auto &s : build_layers(pb, part))
  {
    sets.push_back(compute_green_blocks(*s));
  }
  const BlockGreen g(std::move(sets));
  const CMatrix MM = assemble_M_polarized_dense(g);
  const CMatrix Pgs = dense_of([&](const CVector &v) { return precondition_gs(g, v); }, r.dimension);
  const CMatrix Pjac = dense_of([&](const CVector &v) { return precondition_jac(g, v); }, r.dimension);
  r.gs = eigenvalues(Pgs * MM);
  r.jac = eigenvalues(Pjac * MM);
  r.gs_metric = clustering_metric(r.gs);
  r.jac_metric = clustering_metric(r.jac);
  return r;
}

std::vector<SpectrumResult> run_spectra(const ExperimentConfig &cfg)
{
  std::vector<SpectrumResult> out;
  const fs::path dir = fs::path(cfg.output) / "spectrum";
  fs::create_directories(dir);
  std::ofstream summary(dir / "summary.csv");
  summary << "instance,dimension,gs_metric,jac_metric\n";
  for (const json &inst : cfg.spectrum)
  {
    ExperimentConfig c = cfg;
    const std::string name = inst.value("name", "instance" + std::to_string(out.size()));
    if (inst.contains("model"))
    {
      json tmp = {{"model", inst.at("model")}};
      c.model = parse_config(tmp).model;
    }
    const int nx = inst.at("size").at(0).get<int>(), nz = inst.at("size").at(1).get<int>();
    c.sizes = {{nx, nz}};
    c.npml = inst.value("npml", cfg.npml);
    const auto model = model_for(c, nx, nz);
    const double f = inst.at("freq").get<double>();
    const Problem pb = Problem::make(model, 2.0 * std::numbers::pi * f,
                                     parse_scheme(inst.value("scheme", "fd")));
    SpectrumResult r = dump_spectrum(pb, inst.value("layers", 3), name);
    for (const auto &[tag, eig] : {std::pair{"gs", &r.gs}, std::pair{"jac", &r.jac}})
    {
      std::ofstream os(dir / (name + "_" + tag + ".csv"));
      os << "re,im\n" << std::setprecision(17);
      for (cplx l : *eig)
      {
        os << l.real() << ',' << l.imag() << '\n';
      }
    }
    summary << name << ',' << r.dimension << ',' << fmt(r.gs_metric) << ',' << fmt(r.jac_metric)
            << '\n';
    out.push_back(std::move(r));
  }
  return out;
}

// --- scaling fits ----------------------------------------------------------------

ScalingFit fit_loglog(const std::vector<double> &x, const std::vector<double> &y, double confidence)
{
  if (x.size() != y.size())
  {
    throw ConfigError("fit needs matching x and y");
  }
  const std::set<double> distinct(x.begin(), x.end());
  if (distinct.size() < 3)
  {
    throw ConfigError("scaling fit needs at least 3 distinct sizes, got " +
                      std::to_string(distinct.size()));
  }
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
    {
      throw ConfigError("log-log fit needs positive data");
    }
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
  {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  ScalingFit f;
  f.sizes = int(distinct.size());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i)
  {
    const double e = ly[i] - (f.intercept + f.slope * lx[i]);
    sse += e * e;
  }
  const double dof = double(n) - 2.0;
  const double se = std::sqrt(sse / dof / sxx);
  const boost::math::students_t dist(dof);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.5 * (1.0 - confidence)));
  f.ci_low = f.slope - t * se;
  f.ci_high = f.slope + t * se;
  f.level = std::exp(my);
  return f;
}

std::vector<ScalingFit> fit_scaling(const ResultTable &t, const std::string &column)
{
  auto value = [&](const ResultRow &r) {
    if (column == "touches_per_iter")
    {
      return double(r.touches_per_iter);
    }
    if (column == "iter_s")
    {
      return r.iter_s;
    }
    if (column == "iterations")
    {
      return r.iterations;
    }
    throw ConfigError("cannot fit column '" + column + "' (touches_per_iter, iter_s, iterations)");
  };
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> data;
  std::vector<double> all_x;
  for (const ResultRow &r : t)
  {
    if (r.status.rfind("error", 0) == 0 || value(r) <= 0.0)
    {
      continue;
    }
    data[r.backend].first.push_back(double(r.N));
    data[r.backend].second.push_back(value(r));
    all_x.push_back(std::log(double(r.N)));
  }
  if (data.empty())
  {
    throw ConfigError("no usable rows to fit");
  }
  double ref = 0.0;
  for (double v : all_x)
  {
    ref += v;
  }
  ref /= double(all_x.size());
  std::vector<ScalingFit> out;
  for (const auto &[backend, xy] : data)
  {
    const std::set<double> sizes(xy.first.begin(), xy.first.end());
    if (sizes.size() < 4)
    {
      throw ConfigError("backend " + backend + " has " + std::to_string(sizes.size()) +
                        " sizes; scaling fits need at least 4");
    }
    ScalingFit f = fit_loglog(xy.first, xy.second);
    f.backend = backend;
    f.level = std::exp(f.intercept + f.slope * ref);
    out.push_back(f);
  }
  return out;
}

bool intervals_overlap(const ScalingFit &a, const ScalingFit &b)
{
  return a.ci_low <= b.ci_high && b.ci_low <= a.ci_high;
}

}  // namespace nestedpt
