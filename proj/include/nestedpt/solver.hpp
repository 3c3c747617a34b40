// SPDX-License-Identifier: Apache-2.0
//
// Top-level solver: layered decomposition, interface operators chosen by
// backend, and the outer polarized Krylov solve.

#ifndef NESTEDPT_SOLVER_HPP
#define NESTEDPT_SOLVER_HPP

#include <memory>
#include <string>
#include <vector>

#include "nestedpt/nested.hpp"

namespace nestedpt
{

enum class Backend
{
  direct,     // sparse local solves, cached Green blocks
  nested_pt,  // nested solver, inner polarized traces
  nested_lu   // nested solver, inner block LU
};

Backend parse_backend(const std::string &s);
std::string to_string(Backend b);

struct SolverOptions
{
  int layers = 2;
  int cells = 0;  // cells per layer for nested backends; 0 means the layer count
  Backend backend = Backend::direct;
  Preconditioner prec = Preconditioner::gs;
  KrylovConfig krylov;
  double inner_tol = 1e-6;
  PlrOptions plr;
  std::string artifact_dir;  // offline Green blocks are cached here when set
};

/// Resolves max_rank = 0 to ceil(sqrt(omega)).
PlrOptions resolve_plr(PlrOptions plr, double omega);

struct SolveReport
{
  CVector u;
  KrylovResult krylov;
  double seconds = 0.0;
  std::uint64_t touches = 0;  // operator touches during the interface solve
};

class Solver
{
public:
  Solver(Problem pb, SolverOptions opt);

  const Problem &problem() const { return pb_; }
  const SolverOptions &options() const { return opt_; }
  const Patch &patch() const { return parent_; }
  const LayerPartition &partition() const { return part_; }
  const BoundaryGreen &green() const { return *green_; }
  const VolumeSolver &volume() const { return *volume_; }
  TraceLayout layout() const { return layout_of(*green_); }
  double setup_seconds() const { return setup_seconds_; }
  bool loaded_from_cache() const { return cached_; }

  /// Full solve for a right-hand side on the global patch.
  SolveReport solve(const CVector &rhs) const { return solve(rhs, opt_.prec, opt_.krylov); }
  /// Same setup, different outer preconditioner or Krylov settings.
  SolveReport solve(const CVector &rhs, Preconditioner prec, const KrylovConfig &krylov) const;

  /// One outer iteration: preconditioner applied to the polarized operator.
  CVector iterate_once(const CVector &v, Preconditioner prec) const;
  /// Touches of one outer iteration on a fixed random vector.
  std::uint64_t touches_per_iteration(Preconditioner prec) const;
  /// Median wall time of `repeats` outer iterations after `warmup` runs.
  double seconds_per_iteration(Preconditioner prec, int repeats = 5, int warmup = 1) const;

private:
  Problem pb_;
  SolverOptions opt_;
  Patch parent_;
  LayerPartition part_;
  std::shared_ptr<const BoundaryGreen> green_;
  std::unique_ptr<VolumeSolver> volume_;
  double setup_seconds_ = 0.0;
  bool cached_ = false;
};

}  // namespace nestedpt

#endif  // NESTEDPT_SOLVER_HPP
