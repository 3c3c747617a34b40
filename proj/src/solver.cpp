// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "nestedpt/artifacts.hpp"

namespace nestedpt
{

Backend parse_backend(const std::string &s)
{
  if (s == "direct")
  {
    return Backend::direct;
  }
  if (s == "nested-pt")
  {
    return Backend::nested_pt;
  }
  if (s == "nested-lu")
  {
    return Backend::nested_lu;
  }
  throw ConfigError("unknown backend '" + s + "' (direct, nested-pt, nested-lu)");
}

std::string to_string(Backend b)
{
  switch (b)
  {
  case Backend::direct:
    return "direct";
  case Backend::nested_pt:
    return "nested-pt";
  case Backend::nested_lu:
    return "nested-lu";
  }
  return "?";
}

PlrOptions resolve_plr(PlrOptions plr, double omega)
{
  if (plr.max_rank <= 0)
  {
    plr.max_rank = std::max(1, int(std::ceil(std::sqrt(omega))));
  }
  return plr;
}

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

Solver::Solver(Problem pb, SolverOptions opt) : pb_(std::move(pb)), opt_(std::move(opt))
{
  const auto t0 = Clock::now();
  parent_ = global_patch(pb_);
  part_ = partition_layers(pb_.grid, opt_.layers);
  const PlrOptions plr = resolve_plr(opt_.plr, pb_.omega);

  if (opt_.backend == Backend::direct)
  {
    auto slabs = build_layers(pb_, part_);
    std::vector<GreenBlockSet> sets;
    const std::uint64_t key = artifact_key(pb_, part_, plr);
    std::optional<ArtifactStore> store;
    if (!opt_.artifact_dir.empty())
    {
      store.emplace(opt_.artifact_dir);
      if (auto cached = store->load_green(key); cached && int(cached->size()) == part_.count())
      {
        sets = std::move(*cached);
        cached_ = true;
      }
    }
    if (!cached_)
    {
      for (const auto &s : slabs)
      {
        sets.push_back(compute_green_blocks(*s, plr));
      }
      if (store)
      {
        store->save_green(key, sets, pb_.omega, "outer layers");
      }
    }
    green_ = std::make_shared<BlockGreen>(std::move(sets));
    volume_ = std::make_unique<DirectVolume>(std::move(slabs));
  }
  else
  {
    NestedOptions no;
    no.cells = opt_.cells > 0 ? opt_.cells : opt_.layers;
    no.inner = opt_.backend == Backend::nested_lu ? InnerBackend::block_lu : InnerBackend::polarized;
    no.inner_prec = opt_.prec;
    no.inner_krylov = KrylovConfig{KrylovMethod::gmres, opt_.inner_tol, 200, 0};
    no.plr = plr;
    auto layers = build_nested_layers(pb_, part_, no);
    green_ = std::make_shared<FactoredGreen>(layers);
    volume_ = std::make_unique<NestedVolume>(std::move(layers));
  }
  setup_seconds_ = seconds_since(t0);
}

SolveReport Solver::solve(const CVector &rhs, Preconditioner prec, const KrylovConfig &krylov) const
{
  SolveReport rep;
  const PolarizedTraces traces(green_, prec, krylov);
  const auto t0 = Clock::now();
  const std::uint64_t k0 = touches::get();
  SlabSolveResult r = solve_slabs(parent_, *volume_, traces, rhs);
  rep.touches = touches::get() - k0;
  rep.seconds = seconds_since(t0);
  rep.u = std::move(r.u);
  rep.krylov = std::move(r.traces.krylov);
  return rep;
}

CVector Solver::iterate_once(const CVector &v, Preconditioner prec) const
{
  return precondition(*green_, prec, apply_M_polarized(*green_, v));
}

namespace
{

CVector probe(Index n)
{
  std::mt19937_64 rng(42);
  std::normal_distribution<double> d;
  CVector v(n);
  for (Index i = 0; i < n; ++i)
  {
    v[i] = cplx(d(rng), d(rng));
  }
  return v;
}

}  // namespace

std::uint64_t Solver::touches_per_iteration(Preconditioner prec) const
{
  const CVector v = probe(layout().polarized_size());
  const std::uint64_t k0 = touches::get();
  iterate_once(v, prec);
  return touches::get() - k0;
}

double Solver::seconds_per_iteration(Preconditioner prec, int repeats, int warmup) const
{
  const CVector v = probe(layout().polarized_size());
  for (int i = 0; i < warmup; ++i)
  {
    iterate_once(v, prec);
  }
  std::vector<double> t;
  for (int i = 0; i < std::max(1, repeats); ++i)
  {
    const auto t0 = Clock::now();
    iterate_once(v, prec);
    t.push_back(seconds_since(t0));
  }
  std::nth_element(t.begin(), t.begin() + std::ptrdiff_t(t.size() / 2), t.end());
  return t[t.size() / 2];
}

}  // namespace nestedpt
