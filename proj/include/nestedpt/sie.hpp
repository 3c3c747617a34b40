// SPDX-License-Identifier: Apache-2.0
//
// Interface system of a slab decomposition and its polarized form.
//
// Interfaces are numbered i = 0 .. L-2, interface i lying between slabs i and
// i+1. Each interface carries two panels: side a is the last owned row of
// slab i (its row n), side b the first owned row of slab i+1 (its row 1).
// A trace stack stores panels (i, a), (i, b) for i = 0, 1, ... top to bottom.
// A polarized stack is the down stack followed by the up stack, each laid out
// like a trace stack.
//
// Sign convention: the interface operator is M = G - I, so the right-hand
// side is minus the Newton potential samples and M applied to the exact
// traces reproduces it.

#ifndef NESTEDPT_SIE_HPP
#define NESTEDPT_SIE_HPP

#include <memory>
#include <string>
#include <vector>

#include "nestedpt/green_ops.hpp"
#include "nestedpt/krylov.hpp"

namespace nestedpt
{

struct TraceLayout
{
  int slabs = 0;
  Index panel = 0;

  int interfaces() const { return slabs - 1; }
  Index stack_size() const { return Index(2 * interfaces()) * panel; }
  Index polarized_size() const { return 2 * stack_size(); }
  Index offset(int iface, int side) const { return Index(2 * iface + side) * panel; }
};

inline TraceLayout layout_of(const BoundaryGreen &g) { return {g.count(), g.panel_size()}; }

/// Panel index map from the interleaved ordering (down a, down b, up a,
/// up b per interface) to the down-then-up ordering.
std::vector<Index> polarized_permutation(int slabs);

/// Newton samples of each slab at rows 0, 1, n, n+1.
using NewtonSamples = std::vector<RowSamples>;

CVector build_sie_rhs(const TraceLayout &lay, const NewtonSamples &newton);
CVector build_polarized_rhs(const TraceLayout &lay, const NewtonSamples &newton);

CVector apply_M(const BoundaryGreen &g, const CVector &u);
CVector apply_M_polarized(const BoundaryGreen &g, const CVector &du);

/// Blocks of the polarized operator [[D_down, U], [L, D_up]].
CVector apply_D_down(const BoundaryGreen &g, const CVector &d);
CVector apply_D_up(const BoundaryGreen &g, const CVector &p);
CVector apply_U(const BoundaryGreen &g, const CVector &p);
CVector upward_reflections(const BoundaryGreen &g, const CVector &d);

/// Inverses of the triangular diagonal blocks by sequential sweeps.
CVector sweep_down(const BoundaryGreen &g, const CVector &v);
CVector sweep_up(const BoundaryGreen &g, const CVector &v);

enum class Preconditioner
{
  gs,
  jacobi,
  none
};

Preconditioner parse_preconditioner(const std::string &s);
std::string to_string(Preconditioner p);

CVector precondition_gs(const BoundaryGreen &g, const CVector &v);
CVector precondition_jac(const BoundaryGreen &g, const CVector &v);
CVector precondition(const BoundaryGreen &g, Preconditioner p, const CVector &v);

/// Explicit assemblies from cached blocks (oracles and spectra).
CMatrix assemble_M_dense(const BlockGreen &g);
CMatrix assemble_M_polarized_dense(const BlockGreen &g);
/// Dense matrix of any linear map by applying it to unit vectors.
CMatrix dense_of(const LinearMap &op, Index n);

/// Sum of the down and up stacks.
CVector collapse_polarized(const TraceLayout &lay, const CVector &du);

// --- slab solver ---------------------------------------------------------------

/// Volume solves on the slabs of a decomposition.
class VolumeSolver
{
public:
  virtual ~VolumeSolver() = default;
  virtual int count() const = 0;
  virtual const Subdomain &slab(int s) const = 0;
  virtual CVector solve(int s, const CVector &rhs) const = 0;
};

class DirectVolume final : public VolumeSolver
{
public:
  explicit DirectVolume(std::vector<SubdomainPtr> slabs) : slabs_(std::move(slabs)) {}
  int count() const override { return int(slabs_.size()); }
  const Subdomain &slab(int s) const override { return *slabs_[std::size_t(s)]; }
  CVector solve(int s, const CVector &rhs) const override
  {
    return slabs_[std::size_t(s)]->solve(rhs);
  }

private:
  std::vector<SubdomainPtr> slabs_;
};

struct TraceSolveResult
{
  CVector traces;  // trace stack
  KrylovResult krylov;
};

/// Solves the interface system given the Newton samples of every slab.
class TraceBackend
{
public:
  virtual ~TraceBackend() = default;
  virtual TraceSolveResult solve(const NewtonSamples &newton) const = 0;
};

/// Preconditioned Krylov iteration on the polarized system.
class PolarizedTraces final : public TraceBackend
{
public:
  PolarizedTraces(std::shared_ptr<const BoundaryGreen> green, Preconditioner prec,
                  KrylovConfig cfg)
    : green_(std::move(green)), prec_(prec), cfg_(cfg)
  {
  }
  TraceSolveResult solve(const NewtonSamples &newton) const override;
  const BoundaryGreen &green() const { return *green_; }

private:
  std::shared_ptr<const BoundaryGreen> green_;
  Preconditioner prec_;
  KrylovConfig cfg_;
};

struct SlabSolveResult
{
  CVector u;
  TraceSolveResult traces;
};

/// Newton samples of every slab for a parent right-hand side.
NewtonSamples newton_samples(const Patch &parent, const VolumeSolver &vol, const CVector &rhs);

/// Rhs preparation, interface solve and per-slab reconstruction.
SlabSolveResult solve_slabs(const Patch &parent, const VolumeSolver &vol,
                            const TraceBackend &traces, const CVector &rhs);

/// Reconstructs the parent field from interface traces.
CVector reconstruct(const Patch &parent, const VolumeSolver &vol, const CVector &traces,
                    const CVector &rhs);

/// Interface traces of a parent field, in trace stack layout.
CVector restrict_traces(const Patch &parent, const VolumeSolver &vol, const CVector &u);

}  // namespace nestedpt

#endif  // NESTEDPT_SIE_HPP
