// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/green_ops.hpp"

namespace nestedpt
{

void DirectGreen::apply(int s, const BoundaryData &bd, unsigned targets, RowSamples &out) const
{
  const Subdomain &sd = *slabs_[std::size_t(s)];
  CVector rhs = CVector::Zero(sd.size());
  if (bd.top())
  {
    sd.add_top_sources(rhs, *bd.v0, *bd.v1);
  }
  if (bd.bottom())
  {
    sd.add_bottom_sources(rhs, *bd.vn, *bd.vn1);
  }
  const CVector w = sd.solve(rhs);
  for (int t = 0; t < 4; ++t)
  {
    if (targets & (1u << t))
    {
      out.r[std::size_t(t)] = sd.extract(w, depth_of_slot(t, sd.n()));
    }
  }
}

std::uint64_t GreenBlockSet::touches() const
{
  std::uint64_t n = 0;
  for (const auto &row : down)
  {
    for (const auto &b : row)
    {
      n += b.touches();
    }
  }
  for (const auto &row : up)
  {
    for (const auto &b : row)
    {
      n += b.touches();
    }
  }
  return n;
}

namespace
{

// Solve with `block` placed at depth k and sample the rows in `slots`.
std::array<CMatrix, 4> solve_rows(const Subdomain &s, const SpMat &block, int k, double scale,
                                  unsigned slots)
{
  const Index P = s.panel_size();
  CMatrix rhs = CMatrix::Zero(s.size(), P);
  rhs.middleRows(s.storage_depth(k) * P, P) = scale * CMatrix(block);
  const CMatrix X = s.solve(rhs);
  std::array<CMatrix, 4> out;
  for (int t = 0; t < 4; ++t)
  {
    if (slots & (1u << t))
    {
      out[std::size_t(t)] = X.middleRows(s.storage_depth(depth_of_slot(t, s.n())) * P, P);
    }
  }
  return out;
}

}  // namespace

GreenBlockSet compute_green_blocks(const Subdomain &s, const PlrOptions &plr)
{
  GreenBlockSet b;
  b.n = s.n();
  b.panel = s.panel_size();
  b.has_top = s.has_top();
  b.has_bottom = s.has_bottom();
  const unsigned slots = (b.has_top ? (kRow0 | kRow1) : 0u) | (b.has_bottom ? (kRowN | kRowN1) : 0u);
  auto store = [&](std::array<std::array<BlockOp, 2>, 4> &dst, int which,
                   std::array<CMatrix, 4> &&cols) {
    for (int t = 0; t < 4; ++t)
    {
      if (slots & (1u << t))
      {
        dst[std::size_t(t)][std::size_t(which)] = BlockOp::make(std::move(cols[std::size_t(t)]), plr);
      }
    }
  };
  if (b.has_top)
  {
    store(b.down, 0, solve_rows(s, s.H10(), 1, -1.0, slots));
    store(b.down, 1, solve_rows(s, s.H01(), 0, 1.0, slots));
  }
  if (b.has_bottom)
  {
    store(b.up, 0, solve_rows(s, s.Hn1_n(), s.n() + 1, 1.0, slots));
    store(b.up, 1, solve_rows(s, s.Hn_n1(), s.n(), -1.0, slots));
  }
  return b;
}

void BlockGreen::apply(int s, const BoundaryData &bd, unsigned targets, RowSamples &out) const
{
  const GreenBlockSet &b = blocks_[std::size_t(s)];
  for (int t = 0; t < 4; ++t)
  {
    if (!(targets & (1u << t)))
    {
      continue;
    }
    CVector &y = out.r[std::size_t(t)];
    y = CVector::Zero(b.panel);
    if (bd.top())
    {
      b.down[std::size_t(t)][0].apply_add(*bd.v0, y);
      b.down[std::size_t(t)][1].apply_add(*bd.v1, y);
    }
    if (bd.bottom())
    {
      b.up[std::size_t(t)][0].apply_add(*bd.vn, y);
      b.up[std::size_t(t)][1].apply_add(*bd.vn1, y);
    }
  }
}

std::vector<CMatrix> green_columns(const Subdomain &s, int source_depth,
                                   const std::vector<int> &target_depths)
{
  const Index P = s.panel_size();
  CMatrix rhs = CMatrix::Zero(s.size(), P);
  rhs.middleRows(s.storage_depth(source_depth) * P, P).setIdentity();
  const CMatrix X = s.solve(rhs);
  const double w = s.patch().x.h * s.delta_scale();
  std::vector<CMatrix> out;
  for (int j : target_depths)
  {
    out.push_back(w * X.middleRows(s.storage_depth(j) * P, P));
  }
  return out;
}

CMatrix green_matrix(const Subdomain &s, int target_depth, int source_depth)
{
  return green_columns(s, source_depth, {target_depth}).front();
}

namespace
{

void check_panels(const GreenBlockSet &b, const CVector &a, const CVector &c)
{
  if (a.size() != b.panel || c.size() != b.panel)
  {
    throw ConfigError("incomplete Green integral: panel size mismatch");
  }
}

}  // namespace

CVector incomplete_green_down(const GreenBlockSet &b, const CVector &v0, const CVector &v1,
                              TargetRow target)
{
  check_panels(b, v0, v1);
  if (!b.has_top)
  {
    throw ConfigError("slab has no top interface");
  }
  const auto t = std::size_t(slot_of(target));
  CVector y = CVector::Zero(b.panel);
  b.down[t][0].apply_add(v0, y);
  b.down[t][1].apply_add(v1, y);
  return y;
}

CVector incomplete_green_up(const GreenBlockSet &b, const CVector &vn, const CVector &vn1,
                            TargetRow target)
{
  check_panels(b, vn, vn1);
  if (!b.has_bottom)
  {
    throw ConfigError("slab has no bottom interface");
  }
  const auto t = std::size_t(slot_of(target));
  CVector y = CVector::Zero(b.panel);
  b.up[t][0].apply_add(vn, y);
  b.up[t][1].apply_add(vn1, y);
  return y;
}

CVector incomplete_green_down_dd(const Subdomain &s, const CVector &v0, const CVector &v1,
                                 int target_depth)
{
  const double h = s.patch().x.h;
  const CMatrix G0 = green_matrix(s, target_depth, 0), G1 = green_matrix(s, target_depth, 1);
  return -G0 * ((v1 - v0) / h) + ((G1 - G0) / h) * v0;
}

CVector incomplete_green_up_dd(const Subdomain &s, const CVector &vn, const CVector &vn1,
                               int target_depth)
{
  const double h = s.patch().x.h;
  const CMatrix Gn = green_matrix(s, target_depth, s.n());
  const CMatrix Gn1 = green_matrix(s, target_depth, s.n() + 1);
  return Gn1 * ((vn1 - vn) / h) - ((Gn1 - Gn) / h) * vn1;
}

CVector newton_potential(const Subdomain &s, const CVector &f, int k)
{
  return s.extract(s.solve(f), k);
}

CVector grf_reconstruct(const Subdomain &s, const CVector *u0, const CVector *u1,
                        const CVector *un, const CVector *un1, const CVector &f)
{
  CVector rhs = f;
  if (u0 && u1)
  {
    s.add_top_sources(rhs, *u0, *u1);
  }
  if (un && un1)
  {
    s.add_bottom_sources(rhs, *un, *un1);
  }
  return s.solve(rhs);
}

}  // namespace nestedpt
