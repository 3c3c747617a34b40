// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/nested.hpp"

#include <Eigen/LU>

namespace nestedpt
{

// --- block LU --------------------------------------------------------------------

BlockTridiagonalLU::BlockTridiagonalLU(const CMatrix &M, Index block, const PlrOptions &plr)
  : block_(block)
{
  if (block <= 0 || M.rows() != M.cols() || M.rows() % block != 0)
  {
    throw ConfigError("block LU needs a square matrix made of whole blocks");
  }
  const int m = int(M.rows() / block);
  auto blk = [&](int i, int j) { return M.block(i * block, j * block, block, block); };
  dinv_.resize(std::size_t(m));
  lfac_.resize(std::size_t(m));
  upper_.resize(std::size_t(m));
  pivot_.resize(std::size_t(m));
  CMatrix prev_inv;
  for (int i = 0; i < m; ++i)
  {
    CMatrix piv = blk(i, i);
    if (i > 0)
    {
      const CMatrix l = blk(i, i - 1) * prev_inv;
      piv -= l * blk(i - 1, i);
      lfac_[std::size_t(i)] = BlockOp::make(l, plr);
    }
    const Eigen::PartialPivLU<CMatrix> lu(piv);
    const double rc = lu.rcond();
    if (!(rc > 1e-14))
    {
      throw NumericalError("block LU: pivot block " + std::to_string(i) +
                           " is singular to working precision (rcond " + std::to_string(rc) + ")");
    }
    prev_inv = lu.inverse();
    dinv_[std::size_t(i)] = BlockOp::make(prev_inv, plr);
    pivot_[std::size_t(i)] = std::move(piv);
    if (i + 1 < m)
    {
      upper_[std::size_t(i)] = BlockOp::make(blk(i, i + 1), plr);
    }
  }
}

CVector BlockTridiagonalLU::solve(const CVector &rhs) const
{
  const int m = blocks();
  if (rhs.size() != Index(m) * block_)
  {
    throw ConfigError("block LU: right-hand side has the wrong length");
  }
  CVector z = rhs;
  for (int i = 1; i < m; ++i)
  {
    const CVector prev = z.segment(Index(i - 1) * block_, block_);
    lfac_[std::size_t(i)].apply_add(prev, z.segment(Index(i) * block_, block_), -1.0);
  }
  CVector x(rhs.size());
  for (int i = m - 1; i >= 0; --i)
  {
    CVector r = z.segment(Index(i) * block_, block_);
    if (i + 1 < m)
    {
      upper_[std::size_t(i)].apply_add(x.segment(Index(i + 1) * block_, block_), r, -1.0);
    }
    x.segment(Index(i) * block_, block_) = dinv_[std::size_t(i)].apply(r);
  }
  return x;
}

CMatrix BlockTridiagonalLU::lower() const
{
  const int m = blocks();
  CMatrix L = CMatrix::Identity(Index(m) * block_, Index(m) * block_);
  for (int i = 1; i < m; ++i)
  {
    L.block(Index(i) * block_, Index(i - 1) * block_, block_, block_) =
      lfac_[std::size_t(i)].to_dense();
  }
  return L;
}

CMatrix BlockTridiagonalLU::upper() const
{
  const int m = blocks();
  CMatrix U = CMatrix::Zero(Index(m) * block_, Index(m) * block_);
  for (int i = 0; i < m; ++i)
  {
    U.block(Index(i) * block_, Index(i) * block_, block_, block_) = pivot_[std::size_t(i)];
    if (i + 1 < m)
    {
      U.block(Index(i) * block_, Index(i + 1) * block_, block_, block_) =
        upper_[std::size_t(i)].to_dense();
    }
  }
  return U;
}

std::uint64_t BlockTridiagonalLU::touches() const
{
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < dinv_.size(); ++i)
  {
    n += dinv_[i].touches() + lfac_[i].touches() + upper_[i].touches();
  }
  return n;
}

BlockLUTraces::BlockLUTraces(const BlockGreen &green, const PlrOptions &plr)
  : lay_(layout_of(green)), lu_(assemble_M_dense(green), 2 * lay_.panel, plr)
{
}

TraceSolveResult BlockLUTraces::solve(const NewtonSamples &newton) const
{
  TraceSolveResult out;
  out.traces = lu_.solve(build_sie_rhs(lay_, newton));
  out.krylov.converged = true;
  out.krylov.x = out.traces;
  return out;
}

// --- nested layer ----------------------------------------------------------------

namespace
{

// Layer rows carrying boundary sources, by slot.
constexpr int kSlots = 4;

}  // namespace

NestedLayer::NestedLayer(const Problem &pb, const Patch &parent, const LayerPartition &layers,
                         int index, const NestedOptions &opt)
  : index_(index), opt_(opt)
{
  if (opt.cells < 1)
  {
    throw ConfigError("a layer needs at least one cell");
  }
  layer_ = std::make_shared<Subdomain>(pb, parent, Axis::z, layers, index, false);
  const LayerPartition cp = partition_layers(pb.grid.nx, opt.cells);
  std::vector<GreenBlockSet> sets;
  for (int c = 0; c < opt.cells; ++c)
  {
    auto cell = std::make_shared<Subdomain>(pb, layer_->patch(), Axis::x, cp, c);
    sets.push_back(compute_green_blocks(*cell, opt.plr));
    cells_.push_back(std::move(cell));
  }
  green_ = std::make_shared<BlockGreen>(std::move(sets));
  cell_volume_ = std::make_unique<DirectVolume>(cells_);
  if (opt.cells > 1)
  {
    if (opt.inner == InnerBackend::block_lu)
    {
      traces_ = std::make_unique<BlockLUTraces>(*green_, opt.plr);
    }
    else
    {
      traces_ = std::make_unique<PolarizedTraces>(green_, opt.inner_prec, opt.inner_krylov);
    }
  }
  blocks_.resize(cells_.size());
  for (int c = 0; c < opt.cells; ++c)
  {
    build_cell_blocks(c);
  }
}

void NestedLayer::build_cell_blocks(int c)
{
  const Subdomain &cell = *cells_[std::size_t(c)];
  const Subdomain &lay = *layer_;
  CellBlocks &cb = blocks_[std::size_t(c)];
  const int x0 = cell.owned_lo(), x1 = cell.owned_hi();
  cb.lo = x0 - lay.patch().x.first;
  cb.width = x1 - x0 + 1;
  const Index P = cell.panel_size();
  int zrow[kSlots];
  for (int r = 0; r < kSlots; ++r)
  {
    zrow[r] = lay.depth_node(depth_of_slot(r, lay.n()));
  }
  // Owned nodes of one layer row, as rows of a cell field matrix.
  auto gather = [&](const CMatrix &X, int q) {
    CMatrix g(cb.width, X.cols());
    for (Index j = 0; j < cb.width; ++j)
    {
      g.row(j) = X.row(cell.patch().index(x0 + int(j), q));
    }
    return g;
  };
  const bool slot_ok[kSlots] = {cell.has_top(), cell.has_top(), cell.has_bottom(),
                                cell.has_bottom()};

  for (int zs = 0; zs < kSlots; ++zs)
  {
    CMatrix rhs = CMatrix::Zero(cell.size(), cb.width);
    for (Index j = 0; j < cb.width; ++j)
    {
      rhs(cell.patch().index(x0 + int(j), zrow[zs]), j) = 1.0;
    }
    const CMatrix X = cell.solve(rhs);
    for (int t = 0; t < kSlots; ++t)
    {
      if (slot_ok[t])
      {
        cb.mf[std::size_t(t)][std::size_t(zs)] = BlockOp::make(
          X.middleRows(cell.storage_depth(depth_of_slot(t, cell.n())) * P, P), opt_.plr);
      }
    }
    for (int zr = 0; zr < kSlots; ++zr)
    {
      cb.direct[std::size_t(zr)][std::size_t(zs)] = BlockOp::make(gather(X, zrow[zr]), opt_.plr);
    }
  }

  // Trace sources (v0, v1, vn, vn1) act through the cell coupling blocks.
  struct Source
  {
    bool ok;
    const SpMat *block;
    int depth;
    double scale;
  };
  const Source src[kSlots] = {{cell.has_top(), &cell.H10(), 1, -1.0},
                              {cell.has_top(), &cell.H01(), 0, 1.0},
                              {cell.has_bottom(), &cell.Hn1_n(), cell.n() + 1, 1.0},
                              {cell.has_bottom(), &cell.Hn_n1(), cell.n(), -1.0}};
  for (int k = 0; k < kSlots; ++k)
  {
    if (!src[k].ok)
    {
      continue;
    }
    CMatrix rhs = CMatrix::Zero(cell.size(), P);
    rhs.middleRows(cell.storage_depth(src[k].depth) * P, P) = src[k].scale * CMatrix(*src[k].block);
    const CMatrix X = cell.solve(rhs);
    for (int zr = 0; zr < kSlots; ++zr)
    {
      cb.mu[std::size_t(zr)][std::size_t(k)] = BlockOp::make(gather(X, zrow[zr]), opt_.plr);
    }
  }
}

CVector NestedLayer::inner_solve(const CVector &rhs) const
{
  if (cells() == 1)
  {
    last_iters_ = 0.0;
    const Subdomain &c = *cells_.front();
    CVector u = CVector::Zero(layer_->size());
    c.scatter_owned(c.solve(c.restrict_owned(layer_->patch(), rhs)), layer_->patch(), u);
    return u;
  }
  try
  {
    SlabSolveResult r = solve_slabs(layer_->patch(), *cell_volume_, *traces_, rhs);
    last_iters_ = r.traces.krylov.iterations;
    return std::move(r.u);
  }
  catch (const KrylovError &e)
  {
    throw KrylovError("layer " + std::to_string(index_ + 1) + ": " + e.what(), e.history());
  }
}

void NestedLayer::apply_green_factored(const BoundaryData &bd, unsigned targets,
                                       RowSamples &out) const
{
  const Subdomain &lay = *layer_;
  const Index P = lay.panel_size();
  // Equivalent sources on layer rows 0, 1, n, n+1.
  std::array<CVector, kSlots> S;
  std::array<bool, kSlots> has{};
  if (bd.top())
  {
    S[0] = lay.H01() * *bd.v1;
    S[1] = -(lay.H10() * *bd.v0);
    has[0] = has[1] = true;
  }
  if (bd.bottom())
  {
    S[2] = -(lay.Hn_n1() * *bd.vn1);
    S[3] = lay.Hn1_n() * *bd.vn;
    has[2] = has[3] = true;
  }

  const int nc = cells();
  NewtonSamples newton(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc && nc > 1; ++c)
  {
    const CellBlocks &cb = blocks_[std::size_t(c)];
    const Subdomain &cell = *cells_[std::size_t(c)];
    for (int t = 0; t < kSlots; ++t)
    {
      if ((t < 2 && !cell.has_top()) || (t >= 2 && !cell.has_bottom()))
      {
        continue;
      }
      CVector &r = newton[std::size_t(c)].r[std::size_t(t)];
      r = CVector::Zero(cell.panel_size());
      for (int zs = 0; zs < kSlots; ++zs)
      {
        if (has[std::size_t(zs)])
        {
          cb.mf[std::size_t(t)][std::size_t(zs)].apply_add(S[std::size_t(zs)].segment(cb.lo, cb.width), r);
        }
      }
    }
  }
  CVector traces;
  TraceLayout tl{nc, cells_.front()->panel_size()};
  if (nc > 1)
  {
    try
    {
      const TraceSolveResult tr = traces_->solve(newton);
      last_iters_ = tr.krylov.iterations;
      traces = tr.traces;
    }
    catch (const KrylovError &e)
    {
      throw KrylovError("layer " + std::to_string(index_ + 1) + ": " + e.what(), e.history());
    }
  }

  for (int zr = 0; zr < kSlots; ++zr)
  {
    if (!(targets & (1u << zr)))
    {
      continue;
    }
    CVector &y = out.r[std::size_t(zr)];
    y = CVector::Zero(P);
    for (int c = 0; c < nc; ++c)
    {
      const CellBlocks &cb = blocks_[std::size_t(c)];
      const Subdomain &cell = *cells_[std::size_t(c)];
      auto seg = y.segment(cb.lo, cb.width);
      for (int zs = 0; zs < kSlots; ++zs)
      {
        if (has[std::size_t(zs)])
        {
          cb.direct[std::size_t(zr)][std::size_t(zs)].apply_add(
            S[std::size_t(zs)].segment(cb.lo, cb.width), seg);
        }
      }
      if (nc == 1)
      {
        continue;
      }
      const Index Pc = tl.panel;
      if (cell.has_top())
      {
        cb.mu[std::size_t(zr)][0].apply_add(traces.segment(tl.offset(c - 1, 0), Pc), seg);
        cb.mu[std::size_t(zr)][1].apply_add(traces.segment(tl.offset(c - 1, 1), Pc), seg);
      }
      if (cell.has_bottom())
      {
        cb.mu[std::size_t(zr)][2].apply_add(traces.segment(tl.offset(c, 0), Pc), seg);
        cb.mu[std::size_t(zr)][3].apply_add(traces.segment(tl.offset(c, 1), Pc), seg);
      }
    }
  }
}

std::uint64_t NestedLayer::block_touches() const
{
  std::uint64_t n = 0;
  for (const CellBlocks &cb : blocks_)
  {
    for (int a = 0; a < kSlots; ++a)
    {
      for (int b = 0; b < kSlots; ++b)
      {
        n += cb.mf[std::size_t(a)][std::size_t(b)].touches() +
             cb.direct[std::size_t(a)][std::size_t(b)].touches() +
             cb.mu[std::size_t(a)][std::size_t(b)].touches();
      }
    }
  }
  return n;
}

std::vector<NestedLayerPtr> build_nested_layers(const Problem &pb, const LayerPartition &part,
                                                const NestedOptions &opt)
{
  const Patch gp = global_patch(pb);
  std::vector<NestedLayerPtr> out;
  for (int l = 0; l < part.count(); ++l)
  {
    out.push_back(std::make_shared<NestedLayer>(pb, gp, part, l, opt));
  }
  return out;
}

void FactoredGreen::apply(int s, const BoundaryData &bd, unsigned targets, RowSamples &out) const
{
  layers_[std::size_t(s)]->apply_green_factored(bd, targets, out);
}

}  // namespace nestedpt
