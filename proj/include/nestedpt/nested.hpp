// SPDX-License-Identifier: Apache-2.0
//
// Nested solver for one layer. The layer is cut into cells along x; cells
// store x as their depth axis, so the slab machinery of sie.hpp applies to
// the vertical cell interfaces unchanged.
//
// Boundary-driven layer solves use the factorization
//   samples = Mu * (cell SIE)^-1 * Mf * sources  +  Direct * sources,
// where the sources live on the layer rows 0, 1, n, n+1 and every block is
// precomputed from cell solves.

#ifndef NESTEDPT_NESTED_HPP
#define NESTEDPT_NESTED_HPP

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "nestedpt/sie.hpp"

namespace nestedpt
{

enum class InnerBackend
{
  polarized,  // nested polarized traces
  block_lu    // compressed-block LU of the cell SIE
};

struct NestedOptions
{
  int cells = 2;
  InnerBackend inner = InnerBackend::polarized;
  Preconditioner inner_prec = Preconditioner::gs;
  KrylovConfig inner_krylov{KrylovMethod::gmres, 1e-6, 200, 0};
  PlrOptions plr;
};

/// Unpivoted block LU of a block-tridiagonal interface system with one block
/// per interface. Inverted pivots and off-diagonal blocks are kept as
/// (optionally compressed) operators; solves use matrix-vector products only.
class BlockTridiagonalLU
{
public:
  BlockTridiagonalLU() = default;
  BlockTridiagonalLU(const CMatrix &M, Index block, const PlrOptions &plr = {});

  int blocks() const { return int(dinv_.size()); }
  Index block_size() const { return block_; }
  CVector solve(const CVector &rhs) const;

  /// Dense factors for diagnostics: M = lower() * upper().
  CMatrix lower() const;
  CMatrix upper() const;
  std::uint64_t touches() const;

private:
  Index block_ = 0;
  std::vector<BlockOp> dinv_;   // inverted pivot blocks
  std::vector<BlockOp> lfac_;   // lfac_[i] = A(i, i-1) * pivot(i-1)^-1, i >= 1
  std::vector<BlockOp> upper_;  // upper_[i] = A(i, i+1)
  std::vector<CMatrix> pivot_;  // dense pivots, kept for lower()/upper()
};

/// Direct trace solve of a slab SIE through BlockTridiagonalLU.
class BlockLUTraces final : public TraceBackend
{
public:
  BlockLUTraces(const BlockGreen &green, const PlrOptions &plr = {});
  TraceSolveResult solve(const NewtonSamples &newton) const override;
  const BlockTridiagonalLU &factors() const { return lu_; }

private:
  TraceLayout lay_;
  BlockTridiagonalLU lu_;
};

/// A layer split into cells with everything needed for inner solves.
class NestedLayer
{
public:
  NestedLayer(const Problem &pb, const Patch &parent, const LayerPartition &layers, int index,
              const NestedOptions &opt);

  const Subdomain &layer() const { return *layer_; }
  int cells() const { return int(cells_.size()); }
  const Subdomain &cell(int c) const { return *cells_[std::size_t(c)]; }
  const BlockGreen &cell_green() const { return *green_; }
  const TraceBackend &traces() const { return *traces_; }

  /// Layer solve for a volumetric rhs in layer storage: cell solves plus the cell interface system.
  CVector inner_solve(const CVector &rhs) const;
  /// Layer solve driven by boundary traces, sampled at rows 0, 1, n, n+1.
  void apply_green_factored(const BoundaryData &bd, unsigned targets, RowSamples &out) const;
  /// Iterations of the last inner trace solve (0 for the LU backend).
  double last_inner_iterations() const { return last_iters_; }
  std::uint64_t block_touches() const;

private:
  struct CellBlocks
  {
    Index lo = 0, width = 0;                       // owned x range in layer panel coordinates
    std::array<std::array<BlockOp, 4>, 4> mf;      // [cell slot][layer row]
    std::array<std::array<BlockOp, 4>, 4> direct;  // [layer row][layer row]
    std::array<std::array<BlockOp, 4>, 4> mu;      // [layer row][trace source]
  };

  void build_cell_blocks(int c);

  int index_ = 0;
  NestedOptions opt_;
  std::shared_ptr<Subdomain> layer_;
  std::vector<SubdomainPtr> cells_;
  std::shared_ptr<BlockGreen> green_;
  std::unique_ptr<DirectVolume> cell_volume_;
  std::unique_ptr<TraceBackend> traces_;
  std::vector<CellBlocks> blocks_;
  mutable double last_iters_ = 0.0;
};

using NestedLayerPtr = std::shared_ptr<const NestedLayer>;

std::vector<NestedLayerPtr> build_nested_layers(const Problem &pb, const LayerPartition &part,
                                                const NestedOptions &opt);

/// Outer boundary Green operator realized by the factored nested path.
class FactoredGreen final : public BoundaryGreen
{
public:
  explicit FactoredGreen(std::vector<NestedLayerPtr> layers) : layers_(std::move(layers)) {}
  int count() const override { return int(layers_.size()); }
  Index panel_size() const override { return layers_.front()->layer().panel_size(); }
  void apply(int s, const BoundaryData &bd, unsigned targets, RowSamples &out) const override;

private:
  std::vector<NestedLayerPtr> layers_;
};

/// Layer volume solves through the nested inner solver.
class NestedVolume final : public VolumeSolver
{
public:
  explicit NestedVolume(std::vector<NestedLayerPtr> layers) : layers_(std::move(layers)) {}
  int count() const override { return int(layers_.size()); }
  const Subdomain &slab(int s) const override { return layers_[std::size_t(s)]->layer(); }
  CVector solve(int s, const CVector &rhs) const override
  {
    return layers_[std::size_t(s)]->inner_solve(rhs);
  }

private:
  std::vector<NestedLayerPtr> layers_;
};

}  // namespace nestedpt

#endif  // NESTEDPT_NESTED_HPP
