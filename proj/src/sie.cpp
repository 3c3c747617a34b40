// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/sie.hpp"

namespace nestedpt
{

namespace
{

constexpr int kA = 0, kB = 1;

CVector panel(const CVector &v, const TraceLayout &lay, int iface, int side, Index base = 0)
{
  return v.segment(base + lay.offset(iface, side), lay.panel);
}

auto panel_ref(CVector &v, const TraceLayout &lay, int iface, int side, Index base = 0)
{
  return v.segment(base + lay.offset(iface, side), lay.panel);
}

void check_size(const CVector &v, Index n, const char *what)
{
  if (v.size() != n)
  {
    throw ConfigError(std::string(what) + ": stack has the wrong length");
  }
}

}  // namespace

std::vector<Index> polarized_permutation(int slabs)
{
  const int m = slabs - 1;
  std::vector<Index> perm(std::size_t(4 * m));
  for (int i = 0; i < m; ++i)
  {
    perm[std::size_t(4 * i + 0)] = 2 * i;
    perm[std::size_t(4 * i + 1)] = 2 * i + 1;
    perm[std::size_t(4 * i + 2)] = 2 * m + 2 * i;
    perm[std::size_t(4 * i + 3)] = 2 * m + 2 * i + 1;
  }
  return perm;
}

CVector build_sie_rhs(const TraceLayout &lay, const NewtonSamples &newton)
{
  CVector f = CVector::Zero(lay.stack_size());
  for (int i = 0; i < lay.interfaces(); ++i)
  {
    panel_ref(f, lay, i, kA) = -newton[std::size_t(i)].r[2];
    panel_ref(f, lay, i, kB) = -newton[std::size_t(i + 1)].r[1];
  }
  return f;
}

CVector build_polarized_rhs(const TraceLayout &lay, const NewtonSamples &newton)
{
  CVector f = CVector::Zero(lay.polarized_size());
  const Index up = lay.stack_size();
  for (int i = 0; i < lay.interfaces(); ++i)
  {
    panel_ref(f, lay, i, kA) = -newton[std::size_t(i)].r[2];
    panel_ref(f, lay, i, kB) = -newton[std::size_t(i)].r[3];
    panel_ref(f, lay, i, kA, up) = -newton[std::size_t(i + 1)].r[0];
    panel_ref(f, lay, i, kB, up) = -newton[std::size_t(i + 1)].r[1];
  }
  return f;
}

CVector collapse_polarized(const TraceLayout &lay, const CVector &du)
{
  return du.head(lay.stack_size()) + du.tail(lay.stack_size());
}

CVector apply_M(const BoundaryGreen &g, const CVector &u)
{
  const TraceLayout lay = layout_of(g);
  check_size(u, lay.stack_size(), "apply_M");
  CVector out(u.size());
  for (int s = 0; s < lay.slabs; ++s)
  {
    const bool top = s > 0, bot = s < lay.slabs - 1;
    CVector v0, v1, vn, vn1;
    BoundaryData bd;
    if (top)
    {
      v0 = panel(u, lay, s - 1, kA);
      v1 = panel(u, lay, s - 1, kB);
      bd.v0 = &v0;
      bd.v1 = &v1;
    }
    if (bot)
    {
      vn = panel(u, lay, s, kA);
      vn1 = panel(u, lay, s, kB);
      bd.vn = &vn;
      bd.vn1 = &vn1;
    }
    RowSamples r;
    g.apply(s, bd, (top ? kRow1 : 0u) | (bot ? kRowN : 0u), r);
    if (top)
    {
      panel_ref(out, lay, s - 1, kB) = r.r[1] - v1;
    }
    if (bot)
    {
      panel_ref(out, lay, s, kA) = r.r[2] - vn;
    }
  }
  return out;
}

CVector apply_M_polarized(const BoundaryGreen &g, const CVector &du)
{
  const TraceLayout lay = layout_of(g);
  check_size(du, lay.polarized_size(), "apply_M_polarized");
  const Index up = lay.stack_size();
  CVector out(du.size());
  for (int s = 0; s < lay.slabs; ++s)
  {
    const bool top = s > 0, bot = s < lay.slabs - 1;
    if (bot)
    {
      // Rows n and n+1: total field above, up-going field below.
      CVector v0, v1, vn = panel(du, lay, s, kA, up), vn1 = panel(du, lay, s, kB, up);
      BoundaryData bd{nullptr, nullptr, &vn, &vn1};
      if (top)
      {
        v0 = panel(du, lay, s - 1, kA) + panel(du, lay, s - 1, kA, up);
        v1 = panel(du, lay, s - 1, kB) + panel(du, lay, s - 1, kB, up);
        bd.v0 = &v0;
        bd.v1 = &v1;
      }
      RowSamples r;
      g.apply(s, bd, kRowN | kRowN1, r);
      panel_ref(out, lay, s, kA) = r.r[2] - vn - panel(du, lay, s, kA);
      panel_ref(out, lay, s, kB) = r.r[3] - panel(du, lay, s, kB);
    }
    if (top)
    {
      // Rows 0 and 1: down-going field above, total field below.
      CVector v0 = panel(du, lay, s - 1, kA), v1 = panel(du, lay, s - 1, kB), vn, vn1;
      BoundaryData bd{&v0, &v1, nullptr, nullptr};
      if (bot)
      {
        vn = panel(du, lay, s, kA) + panel(du, lay, s, kA, up);
        vn1 = panel(du, lay, s, kB) + panel(du, lay, s, kB, up);
        bd.vn = &vn;
        bd.vn1 = &vn1;
      }
      RowSamples r;
      g.apply(s, bd, kRow0 | kRow1, r);
      panel_ref(out, lay, s - 1, kA, up) = r.r[0] - panel(du, lay, s - 1, kA, up);
      panel_ref(out, lay, s - 1, kB, up) = r.r[1] - panel(du, lay, s - 1, kB, up) - v1;
    }
  }
  return out;
}

CVector apply_D_down(const BoundaryGreen &g, const CVector &d)
{
  const TraceLayout lay = layout_of(g);
  check_size(d, lay.stack_size(), "apply_D_down");
  CVector out(d.size());
  for (int i = 0; i < lay.interfaces(); ++i)
  {
    const int s = i;
    panel_ref(out, lay, i, kA) = -panel(d, lay, i, kA);
    panel_ref(out, lay, i, kB) = -panel(d, lay, i, kB);
    if (s > 0)
    {
      const CVector v0 = panel(d, lay, i - 1, kA), v1 = panel(d, lay, i - 1, kB);
      RowSamples r;
      g.apply(s, BoundaryData{&v0, &v1, nullptr, nullptr}, kRowN | kRowN1, r);
      panel_ref(out, lay, i, kA) += r.r[2];
      panel_ref(out, lay, i, kB) += r.r[3];
    }
  }
  return out;
}

CVector apply_D_up(const BoundaryGreen &g, const CVector &p)
{
  const TraceLayout lay = layout_of(g);
  check_size(p, lay.stack_size(), "apply_D_up");
  CVector out(p.size());
  for (int i = 0; i < lay.interfaces(); ++i)
  {
    const int s = i + 1;
    panel_ref(out, lay, i, kA) = -panel(p, lay, i, kA);
    panel_ref(out, lay, i, kB) = -panel(p, lay, i, kB);
    if (s < lay.slabs - 1)
    {
      const CVector vn = panel(p, lay, i + 1, kA), vn1 = panel(p, lay, i + 1, kB);
      RowSamples r;
      g.apply(s, BoundaryData{nullptr, nullptr, &vn, &vn1}, kRow0 | kRow1, r);
      panel_ref(out, lay, i, kA) += r.r[0];
      panel_ref(out, lay, i, kB) += r.r[1];
    }
  }
  return out;
}

CVector apply_U(const BoundaryGreen &g, const CVector &p)
{
  const TraceLayout lay = layout_of(g);
  check_size(p, lay.stack_size(), "apply_U");
  CVector out(p.size());
  for (int s = 0; s < lay.slabs - 1; ++s)
  {
    CVector v0, v1, vn = panel(p, lay, s, kA), vn1 = panel(p, lay, s, kB);
    BoundaryData bd{nullptr, nullptr, &vn, &vn1};
    if (s > 0)
    {
      v0 = panel(p, lay, s - 1, kA);
      v1 = panel(p, lay, s - 1, kB);
      bd.v0 = &v0;
      bd.v1 = &v1;
    }
    RowSamples r;
    g.apply(s, bd, kRowN | kRowN1, r);
    panel_ref(out, lay, s, kA) = r.r[2] - vn;
    panel_ref(out, lay, s, kB) = r.r[3];
  }
  return out;
}

CVector upward_reflections(const BoundaryGreen &g, const CVector &d)
{
  const TraceLayout lay = layout_of(g);
  check_size(d, lay.stack_size(), "upward_reflections");
  CVector out(d.size());
  // Independent per slab.
  for (int s = 1; s < lay.slabs; ++s)
  {
    CVector v0 = panel(d, lay, s - 1, kA), v1 = panel(d, lay, s - 1, kB), vn, vn1;
    BoundaryData bd{&v0, &v1, nullptr, nullptr};
    if (s < lay.slabs - 1)
    {
      vn = panel(d, lay, s, kA);
      vn1 = panel(d, lay, s, kB);
      bd.vn = &vn;
      bd.vn1 = &vn1;
    }
    RowSamples r;
    g.apply(s, bd, kRow0 | kRow1, r);
    panel_ref(out, lay, s - 1, kA) = r.r[0];
    panel_ref(out, lay, s - 1, kB) = r.r[1] - v1;
  }
  return out;
}

CVector sweep_down(const BoundaryGreen &g, const CVector &v)
{
  const TraceLayout lay = layout_of(g);
  check_size(v, lay.stack_size(), "sweep_down");
  CVector d(v.size());
  if (lay.interfaces() == 0)
  {
    return d;
  }
  panel_ref(d, lay, 0, kA) = -panel(v, lay, 0, kA);
  panel_ref(d, lay, 0, kB) = -panel(v, lay, 0, kB);
  for (int i = 1; i < lay.interfaces(); ++i)
  {
    const CVector v0 = panel(d, lay, i - 1, kA), v1 = panel(d, lay, i - 1, kB);
    RowSamples r;
    g.apply(i, BoundaryData{&v0, &v1, nullptr, nullptr}, kRowN | kRowN1, r);
    panel_ref(d, lay, i, kA) = r.r[2] - panel(v, lay, i, kA);
    panel_ref(d, lay, i, kB) = r.r[3] - panel(v, lay, i, kB);
  }
  return d;
}

CVector sweep_up(const BoundaryGreen &g, const CVector &v)
{
  const TraceLayout lay = layout_of(g);
  check_size(v, lay.stack_size(), "sweep_up");
  CVector p(v.size());
  const int m = lay.interfaces();
  if (m == 0)
  {
    return p;
  }
  panel_ref(p, lay, m - 1, kA) = -panel(v, lay, m - 1, kA);
  panel_ref(p, lay, m - 1, kB) = -panel(v, lay, m - 1, kB);
  for (int i = m - 2; i >= 0; --i)
  {
    const CVector vn = panel(p, lay, i + 1, kA), vn1 = panel(p, lay, i + 1, kB);
    RowSamples r;
    g.apply(i + 1, BoundaryData{nullptr, nullptr, &vn, &vn1}, kRow0 | kRow1, r);
    panel_ref(p, lay, i, kA) = r.r[0] - panel(v, lay, i, kA);
    panel_ref(p, lay, i, kB) = r.r[1] - panel(v, lay, i, kB);
  }
  return p;
}

Preconditioner parse_preconditioner(const std::string &s)
{
  if (s == "gs")
  {
    return Preconditioner::gs;
  }
  if (s == "jac" || s == "jacobi")
  {
    return Preconditioner::jacobi;
  }
  if (s == "none")
  {
    return Preconditioner::none;
  }
  throw ConfigError("unknown preconditioner '" + s + "'");
}

std::string to_string(Preconditioner p)
{
  return p == Preconditioner::gs ? "gs" : p == Preconditioner::jacobi ? "jac" : "none";
}

CVector precondition_gs(const BoundaryGreen &g, const CVector &v)
{
  const TraceLayout lay = layout_of(g);
  check_size(v, lay.polarized_size(), "precondition_gs");
  const Index m = lay.stack_size();
  CVector out(v.size());
  const CVector d = sweep_down(g, v.head(m));
  out.head(m) = d;
  out.tail(m) = sweep_up(g, v.tail(m) - upward_reflections(g, d));
  return out;
}

CVector precondition_jac(const BoundaryGreen &g, const CVector &v)
{
  const TraceLayout lay = layout_of(g);
  check_size(v, lay.polarized_size(), "precondition_jac");
  const Index m = lay.stack_size();
  CVector out(v.size());
  out.head(m) = sweep_down(g, v.head(m));
  out.tail(m) = sweep_up(g, v.tail(m));
  return out;
}

CVector precondition(const BoundaryGreen &g, Preconditioner p, const CVector &v)
{
  switch (p)
  {
    case Preconditioner::gs:
      return precondition_gs(g, v);
    case Preconditioner::jacobi:
      return precondition_jac(g, v);
    case Preconditioner::none:
      break;
  }
  return v;
}

// --- dense assembly ------------------------------------------------------------

namespace
{

void add_block(CMatrix &M, Index r, Index c, const BlockOp &b)
{
  if (!b.empty())
  {
    M.block(r, c, b.rows(), b.cols()) += b.to_dense();
  }
}

void add_identity(CMatrix &M, Index r, Index c, Index P, double a)
{
  M.block(r, c, P, P).diagonal().array() += a;
}

}  // namespace

CMatrix assemble_M_dense(const BlockGreen &g)
{
  const TraceLayout lay = layout_of(g);
  const Index P = lay.panel;
  CMatrix M = CMatrix::Zero(lay.stack_size(), lay.stack_size());
  for (int s = 0; s < lay.slabs; ++s)
  {
    const GreenBlockSet &b = g.blocks(s);
    const bool top = s > 0, bot = s < lay.slabs - 1;
    // (slot, row offset) pairs of this slab's sampled rows.
    std::vector<std::pair<int, Index>> rows;
    if (top)
    {
      rows.emplace_back(1, lay.offset(s - 1, kB));
    }
    if (bot)
    {
      rows.emplace_back(2, lay.offset(s, kA));
    }
    for (auto [t, r] : rows)
    {
      if (top)
      {
        add_block(M, r, lay.offset(s - 1, kA), b.down[std::size_t(t)][0]);
        add_block(M, r, lay.offset(s - 1, kB), b.down[std::size_t(t)][1]);
      }
      if (bot)
      {
        add_block(M, r, lay.offset(s, kA), b.up[std::size_t(t)][0]);
        add_block(M, r, lay.offset(s, kB), b.up[std::size_t(t)][1]);
      }
      add_identity(M, r, r, P, -1.0);
    }
  }
  return M;
}

CMatrix assemble_M_polarized_dense(const BlockGreen &g)
{
  const TraceLayout lay = layout_of(g);
  const Index P = lay.panel, up = lay.stack_size();
  CMatrix M = CMatrix::Zero(lay.polarized_size(), lay.polarized_size());
  for (int s = 0; s < lay.slabs; ++s)
  {
    const GreenBlockSet &b = g.blocks(s);
    const bool top = s > 0, bot = s < lay.slabs - 1;
    if (bot)
    {
      for (int t : {2, 3})
      {
        const Index r = lay.offset(s, t == 2 ? kA : kB);
        if (top)
        {
          for (Index base : {Index(0), up})
          {
            add_block(M, r, base + lay.offset(s - 1, kA), b.down[std::size_t(t)][0]);
            add_block(M, r, base + lay.offset(s - 1, kB), b.down[std::size_t(t)][1]);
          }
        }
        add_block(M, r, up + lay.offset(s, kA), b.up[std::size_t(t)][0]);
        add_block(M, r, up + lay.offset(s, kB), b.up[std::size_t(t)][1]);
      }
      add_identity(M, lay.offset(s, kA), lay.offset(s, kA), P, -1.0);
      add_identity(M, lay.offset(s, kA), up + lay.offset(s, kA), P, -1.0);
      add_identity(M, lay.offset(s, kB), lay.offset(s, kB), P, -1.0);
    }
    if (top)
    {
      for (int t : {0, 1})
      {
        const Index r = up + lay.offset(s - 1, t == 0 ? kA : kB);
        add_block(M, r, lay.offset(s - 1, kA), b.down[std::size_t(t)][0]);
        add_block(M, r, lay.offset(s - 1, kB), b.down[std::size_t(t)][1]);
        if (bot)
        {
          for (Index base : {Index(0), up})
          {
            add_block(M, r, base + lay.offset(s, kA), b.up[std::size_t(t)][0]);
            add_block(M, r, base + lay.offset(s, kB), b.up[std::size_t(t)][1]);
          }
        }
      }
      const Index ra = up + lay.offset(s - 1, kA), rb = up + lay.offset(s - 1, kB);
      add_identity(M, ra, ra, P, -1.0);
      add_identity(M, rb, rb, P, -1.0);
      add_identity(M, rb, lay.offset(s - 1, kB), P, -1.0);
    }
  }
  return M;
}

CMatrix dense_of(const LinearMap &op, Index n)
{
  CMatrix A(n, n);
  CVector e = CVector::Zero(n);
  for (Index j = 0; j < n; ++j)
  {
    e[j] = 1.0;
    A.col(j) = op(e);
    e[j] = 0.0;
  }
  return A;
}

// --- slab solver -----------------------------------------------------------------

TraceSolveResult PolarizedTraces::solve(const NewtonSamples &newton) const
{
  const BoundaryGreen &g = *green_;
  const TraceLayout lay = layout_of(g);
  const CVector rhs = build_polarized_rhs(lay, newton);
  TraceSolveResult out;
  const LinearMap op = [&g](const CVector &v) { return apply_M_polarized(g, v); };
  LinearMap prec;
  if (prec_ != Preconditioner::none)
  {
    const Preconditioner p = prec_;
    prec = [&g, p](const CVector &v) { return precondition(g, p, v); };
  }
  out.krylov = krylov_solve(op, prec, rhs, cfg_);
  if (!out.krylov.converged)
  {
    throw KrylovError("polarized trace iteration did not reach " + std::to_string(cfg_.ktol) +
                        " within " + std::to_string(cfg_.max_iter) + " iterations",
                      out.krylov.history);
  }
  out.traces = collapse_polarized(lay, out.krylov.x);
  return out;
}

NewtonSamples newton_samples(const Patch &parent, const VolumeSolver &vol, const CVector &rhs)
{
  NewtonSamples out(std::size_t(vol.count()));
  for (int s = 0; s < vol.count(); ++s)
  {
    const Subdomain &sd = vol.slab(s);
    const CVector w = vol.solve(s, sd.restrict_owned(parent, rhs));
    RowSamples &r = out[std::size_t(s)];
    if (sd.has_top())
    {
      r.r[0] = sd.extract(w, 0);
      r.r[1] = sd.extract(w, 1);
    }
    if (sd.has_bottom())
    {
      r.r[2] = sd.extract(w, sd.n());
      r.r[3] = sd.extract(w, sd.n() + 1);
    }
  }
  return out;
}

CVector reconstruct(const Patch &parent, const VolumeSolver &vol, const CVector &traces,
                    const CVector &rhs)
{
  const TraceLayout lay{vol.count(), vol.count() > 1 ? vol.slab(0).panel_size() : 0};
  CVector u = CVector::Zero(parent.size());
  for (int s = 0; s < vol.count(); ++s)
  {
    const Subdomain &sd = vol.slab(s);
    CVector f = sd.restrict_owned(parent, rhs);
    if (sd.has_top())
    {
      sd.add_top_sources(f, panel(traces, lay, s - 1, kA), panel(traces, lay, s - 1, kB));
    }
    if (sd.has_bottom())
    {
      sd.add_bottom_sources(f, panel(traces, lay, s, kA), panel(traces, lay, s, kB));
    }
    sd.scatter_owned(vol.solve(s, f), parent, u);
  }
  return u;
}

SlabSolveResult solve_slabs(const Patch &parent, const VolumeSolver &vol,
                            const TraceBackend &traces, const CVector &rhs)
{
  if (rhs.size() != parent.size())
  {
    throw ConfigError("right-hand side does not match the domain size");
  }
  SlabSolveResult out;
  if (vol.count() == 1)
  {
    out.u = CVector::Zero(parent.size());
    const Subdomain &sd = vol.slab(0);
    sd.scatter_owned(vol.solve(0, sd.restrict_owned(parent, rhs)), parent, out.u);
    return out;
  }
  out.traces = traces.solve(newton_samples(parent, vol, rhs));
  out.u = reconstruct(parent, vol, out.traces.traces, rhs);
  return out;
}

CVector restrict_traces(const Patch &parent, const VolumeSolver &vol, const CVector &u)
{
  const TraceLayout lay{vol.count(), vol.slab(0).panel_size()};
  CVector t(lay.stack_size());
  for (int i = 0; i < lay.interfaces(); ++i)
  {
    const Subdomain &a = vol.slab(i), &b = vol.slab(i + 1);
    panel_ref(t, lay, i, kA) = a.extract(a.restrict_owned(parent, u), a.n());
    panel_ref(t, lay, i, kB) = b.extract(b.restrict_owned(parent, u), 1);
  }
  return t;
}

}  // namespace nestedpt
