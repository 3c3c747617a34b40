// SPDX-License-Identifier: Apache-2.0

#ifndef NESTEDPT_SUBDOMAIN_HPP
#define NESTEDPT_SUBDOMAIN_HPP

#include <memory>
#include <vector>

#include "nestedpt/discretization.hpp"
#include "nestedpt/sparse_lu.hpp"

namespace nestedpt
{

/// Split of n physical rows into near-equal slabs; the remainder goes to the
/// first slabs.
struct LayerPartition
{
  std::vector<int> extents;
  std::vector<int> offsets;  // rows before each slab

  int count() const { return int(extents.size()); }
  int interfaces() const { return count() - 1; }
};

LayerPartition partition_layers(int n, int count);
LayerPartition partition_layers(const Grid &grid, int L);

/// One slab of a parent patch with its own PML collar: a layer when cut
/// along z, a cell (with swapped storage) when cut along x.
///
/// Depth indices k follow the interface convention: k = 1..n are the owned
/// rows, k = 0 and k = n+1 the rows just outside.
class Subdomain
{
public:
  Subdomain(const Problem &pb, const Patch &parent, Axis axis, const LayerPartition &part,
            int index, bool factorize = true);

  /// The whole patch as a single subdomain without interfaces.
  static Subdomain whole(const Problem &pb, const Patch &patch, bool factorize = true);

  int index() const { return index_; }
  const Patch &patch() const { return patch_; }
  const SpMat &op() const { return H_; }
  int n() const { return own_last_ - own_first_ + 1; }
  bool has_top() const { return has_top_; }
  bool has_bottom() const { return has_bottom_; }
  Index panel_size() const { return patch_.row_size(); }
  Index size() const { return patch_.size(); }

  /// Node number along the depth axis of interface index k.
  int depth_node(int k) const { return own_first_ - 1 + k; }
  Index storage_depth(int k) const { return depth_node(k) - patch_.depth().first; }
  /// Owned depth nodes, including the physical PML at the outer slabs.
  int owned_lo() const { return owned_lo_; }
  int owned_hi() const { return owned_hi_; }

  void factorize();
  bool factorized() const { return lu_.factored(); }
  CVector solve(const CVector &rhs) const;
  CMatrix solve(const CMatrix &rhs) const;
  std::int64_t factor_nnz() const { return lu_.factor_nnz(); }

  CVector extract(const CVector &field, int k) const;
  /// Adds a point-source row carrying `panel` at depth k (scaled like
  /// delta_source).
  void inject(CVector &rhs, const CVector &panel, int k) const;

  /// Equivalent sources that make a local solve reproduce a field with
  /// traces (v0, v1) above and (vn, vn1) below the slab.
  void add_top_sources(CVector &rhs, const CVector &v0, const CVector &v1) const;
  void add_bottom_sources(CVector &rhs, const CVector &vn, const CVector &vn1) const;

  /// Block of the local operator coupling depth rows k (rows) and kk (cols).
  SpMat coupling(int k, int kk) const;
  const SpMat &H10() const { return h10_; }
  const SpMat &H01() const { return h01_; }
  const SpMat &Hn_n1() const { return hnn1_; }
  const SpMat &Hn1_n() const { return hn1n_; }

  /// Parent values on the owned rows, zero elsewhere.
  CVector restrict_owned(const Patch &parent, const CVector &v) const;
  /// Write owned rows of a local field into a parent vector.
  void scatter_owned(const CVector &local, const Patch &parent, CVector &v) const;

  double delta_scale() const { return delta_scale_; }

private:
  Subdomain() = default;
  void finish(const Problem &pb, bool factorize);

  Patch patch_;
  Axis axis_ = Axis::z;
  int index_ = 0;
  int own_first_ = 1, own_last_ = 0;
  int owned_lo_ = 1, owned_hi_ = 0;
  bool has_top_ = false, has_bottom_ = false;
  double omega_ = 0.0;
  double delta_scale_ = 1.0;
  SpMat H_;
  SpMat h10_, h01_, hnn1_, hn1n_;
  SparseLU lu_;
};

using SubdomainPtr = std::shared_ptr<const Subdomain>;

/// Builds and factorizes every layer of a horizontal partition.
std::vector<SubdomainPtr> build_layers(const Problem &pb, const LayerPartition &part,
                                       bool factorize = true);

/// Direct solve of the global problem (the reference solution).
CVector solve_global(const Problem &pb, const CVector &rhs);

}  // namespace nestedpt

#endif  // NESTEDPT_SUBDOMAIN_HPP
