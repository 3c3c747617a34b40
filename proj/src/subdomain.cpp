// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/subdomain.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace nestedpt
{

LayerPartition partition_layers(int n, int count)
{
  if (count < 1)
  {
    throw ConfigError("partition needs at least one slab");
  }
  if (count > 1 && n < 2 * count)
  {
    throw ConfigError("cannot split " + std::to_string(n) + " rows into " +
                      std::to_string(count) + " slabs of at least two rows");
  }
  LayerPartition part;
  const int base = n / count, rem = n % count;
  int off = 0;
  for (int s = 0; s < count; ++s)
  {
    const int e = base + (s < rem ? 1 : 0);
    part.offsets.push_back(off);
    part.extents.push_back(e);
    off += e;
  }
  return part;
}

LayerPartition partition_layers(const Grid &grid, int L) { return partition_layers(grid.nz, L); }

namespace
{

// Physical nodes along an axis are those strictly between the damping edges.
int physical_first(const AxisProfile &a) { return int(std::lround(a.left_edge / a.h)) + 1; }
int physical_last(const AxisProfile &a) { return int(std::lround(a.right_edge / a.h)) - 1; }

}  // namespace

Subdomain::Subdomain(const Problem &pb, const Patch &parent, Axis axis, const LayerPartition &part,
                     int index, bool factorize)
  : axis_(axis), index_(index)
{
  if (index < 0 || index >= part.count())
  {
    throw ConfigError("subdomain index out of range");
  }
  const AxisProfile &cut = axis == Axis::z ? parent.z : parent.x;
  const int phys0 = physical_first(cut), phys1 = physical_last(cut);
  int total = 0;
  for (int e : part.extents)
  {
    total += e;
  }
  if (total != phys1 - phys0 + 1)
  {
    throw ConfigError("partition does not cover the physical rows of the parent patch");
  }
  const int L = part.count();
  own_first_ = phys0 + part.offsets[std::size_t(index)];
  own_last_ = own_first_ + part.extents[std::size_t(index)] - 1;
  has_top_ = index > 0;
  has_bottom_ = index < L - 1;
  if ((has_top_ || has_bottom_) && pb.grid.npml < 1)
  {
    throw ConfigError("interfaces need a PML of at least one node");
  }

  AxisProfile prof = cut;
  if (has_top_)
  {
    prof.first = own_first_ - pb.grid.npml;
    prof.left_edge = (own_first_ - 1) * cut.h;
  }
  if (has_bottom_)
  {
    prof.last = own_last_ + pb.grid.npml;
    prof.right_edge = (own_last_ + 1) * cut.h;
  }
  patch_ = parent;
  (axis == Axis::z ? patch_.z : patch_.x) = prof;
  patch_.depth_is_z = axis == Axis::z;
  owned_lo_ = has_top_ ? own_first_ : prof.first;
  owned_hi_ = has_bottom_ ? own_last_ : prof.last;
  finish(pb, factorize);
}

Subdomain Subdomain::whole(const Problem &pb, const Patch &patch, bool factorize)
{
  Subdomain s;
  s.patch_ = patch;
  s.axis_ = patch.depth_is_z ? Axis::z : Axis::x;
  s.own_first_ = patch.depth().first;
  s.own_last_ = patch.depth().last;
  s.owned_lo_ = s.own_first_;
  s.owned_hi_ = s.own_last_;
  s.finish(pb, factorize);
  return s;
}

void Subdomain::finish(const Problem &pb, bool factorize)
{
  omega_ = pb.omega;
  delta_scale_ = nestedpt::delta_scale(pb);
  H_ = assemble(pb, patch_);
  if (has_top_)
  {
    h10_ = coupling(1, 0);
    h01_ = coupling(0, 1);
  }
  if (has_bottom_)
  {
    hnn1_ = coupling(n(), n() + 1);
    hn1n_ = coupling(n() + 1, n());
  }
  if (factorize)
  {
    this->factorize();
  }
}

void Subdomain::factorize()
{
  if (lu_.factored())
  {
    return;
  }
  try
  {
    lu_.factor(H_);
  }
  catch (const NumericalError &e)
  {
    std::ostringstream msg;
    msg << "factorization of subdomain " << index_ + 1 << " failed at omega = " << omega_ << ": "
        << e.what();
    throw NumericalError(msg.str());
  }
}

CVector Subdomain::solve(const CVector &rhs) const
{
  if (rhs.size() != size())
  {
    throw ConfigError("local right-hand side has size " + std::to_string(rhs.size()) +
                      ", expected " + std::to_string(size()));
  }
  return lu_.solve(rhs);
}

CMatrix Subdomain::solve(const CMatrix &rhs) const
{
  if (rhs.rows() != size())
  {
    throw ConfigError("local right-hand side block has the wrong row count");
  }
  return lu_.solve(rhs);
}

SpMat Subdomain::coupling(int k, int kk) const
{
  const Index P = panel_size();
  const Index r = storage_depth(k), c = storage_depth(kk);
  if (r < 0 || c < 0 || r >= patch_.depth_size() || c >= patch_.depth_size())
  {
    throw ConfigError("coupling block outside the local grid");
  }
  return SpMat(H_.block(r * P, c * P, P, P));
}

CVector Subdomain::extract(const CVector &field, int k) const
{
  const Index d = storage_depth(k);
  if (d < 0 || d >= patch_.depth_size())
  {
    throw ConfigError("trace depth " + std::to_string(k) + " outside the local grid");
  }
  return field.segment(d * panel_size(), panel_size());
}

void Subdomain::inject(CVector &rhs, const CVector &panel, int k) const
{
  const Index d = storage_depth(k);
  if (d < 0 || d >= patch_.depth_size())
  {
    throw ConfigError("trace depth " + std::to_string(k) + " outside the local grid");
  }
  if (panel.size() != panel_size())
  {
    throw ConfigError("panel size mismatch");
  }
  rhs.segment(d * panel_size(), panel_size()) += delta_scale_ * panel;
}

void Subdomain::add_top_sources(CVector &rhs, const CVector &v0, const CVector &v1) const
{
  const Index P = panel_size();
  rhs.segment(storage_depth(1) * P, P) -= h10_ * v0;
  rhs.segment(storage_depth(0) * P, P) += h01_ * v1;
}

void Subdomain::add_bottom_sources(CVector &rhs, const CVector &vn, const CVector &vn1) const
{
  const Index P = panel_size();
  rhs.segment(storage_depth(n()) * P, P) -= hnn1_ * vn1;
  rhs.segment(storage_depth(n() + 1) * P, P) += hn1n_ * vn;
}

CVector Subdomain::restrict_owned(const Patch &parent, const CVector &v) const
{
  CVector out = CVector::Zero(size());
  if (axis_ == Axis::z)
  {
    copy_nodes(parent, v, patch_, out, patch_.x.first, patch_.x.last, owned_lo_, owned_hi_);
  }
  else
  {
    copy_nodes(parent, v, patch_, out, owned_lo_, owned_hi_, patch_.z.first, patch_.z.last);
  }
  return out;
}

void Subdomain::scatter_owned(const CVector &local, const Patch &parent, CVector &v) const
{
  if (axis_ == Axis::z)
  {
    copy_nodes(patch_, local, parent, v, patch_.x.first, patch_.x.last, owned_lo_, owned_hi_);
  }
  else
  {
    copy_nodes(patch_, local, parent, v, owned_lo_, owned_hi_, patch_.z.first, patch_.z.last);
  }
}

std::vector<SubdomainPtr> build_layers(const Problem &pb, const LayerPartition &part,
                                       bool factorize)
{
  const Patch g = global_patch(pb);
  std::vector<SubdomainPtr> layers;
  layers.reserve(std::size_t(part.count()));
  for (int l = 0; l < part.count(); ++l)
  {
    layers.push_back(std::make_shared<const Subdomain>(pb, g, Axis::z, part, l, factorize));
  }
  return layers;
}

CVector solve_global(const Problem &pb, const CVector &rhs)
{
  const Patch g = global_patch(pb);
  SparseLU lu(assemble(pb, g));
  return lu.solve(rhs);
}

}  // namespace nestedpt
