// SPDX-License-Identifier: Apache-2.0
//
// Interface Green operators of a slab and the discrete representation
// formula. Row labels 0, 1, n, n+1 refer to the interface depth indices of a
// Subdomain.

#ifndef NESTEDPT_GREEN_OPS_HPP
#define NESTEDPT_GREEN_OPS_HPP

#include <array>
#include <vector>

#include "nestedpt/plr.hpp"
#include "nestedpt/subdomain.hpp"

namespace nestedpt
{

/// Target rows, usable as a bit mask.
enum TargetRow : unsigned
{
  kRow0 = 1u,
  kRow1 = 2u,
  kRowN = 4u,
  kRowN1 = 8u,
  kAllRows = 15u
};

/// Slot 0..3 of a target row in RowSamples / GreenBlockSet.
inline int slot_of(TargetRow r) { return r == kRow0 ? 0 : r == kRow1 ? 1 : r == kRowN ? 2 : 3; }
/// Interface depth index for slot t of a slab with n owned rows.
inline int depth_of_slot(int t, int n) { return t == 0 ? 0 : t == 1 ? 1 : t == 2 ? n : n + 1; }

/// Boundary traces driving a slab: (v0, v1) above and (vn, vn1) below.
/// Missing sides are null.
struct BoundaryData
{
  const CVector *v0 = nullptr, *v1 = nullptr, *vn = nullptr, *vn1 = nullptr;
  bool top() const { return v0 != nullptr; }
  bool bottom() const { return vn != nullptr; }
};

/// Field samples at rows 0, 1, n, n+1 (slots 0..3).
struct RowSamples
{
  std::array<CVector, 4> r;
};

/// Sum of the down- and up-going incomplete Green integrals of every slab of
/// a decomposition, sampled at its boundary rows.
class BoundaryGreen
{
public:
  virtual ~BoundaryGreen() = default;
  virtual int count() const = 0;
  virtual Index panel_size() const = 0;
  /// Writes the requested target rows of out; other rows are untouched.
  virtual void apply(int s, const BoundaryData &bd, unsigned targets, RowSamples &out) const = 0;
};

/// Matrix-free realization: one local solve per application.
class DirectGreen final : public BoundaryGreen
{
public:
  explicit DirectGreen(std::vector<SubdomainPtr> slabs) : slabs_(std::move(slabs)) {}
  int count() const override { return int(slabs_.size()); }
  Index panel_size() const override { return slabs_.front()->panel_size(); }
  void apply(int s, const BoundaryData &bd, unsigned targets, RowSamples &out) const override;

private:
  std::vector<SubdomainPtr> slabs_;
};

/// Redefined corner blocks of one slab: for target slot t,
/// down[t] = {T_t0, T_t1} act on (v0, v1) and up[t] = {B_tn, B_tn1} act on
/// (vn, vn1). T_t0 = -R_t1 H_10, T_t1 = R_t0 H_01, B_tn = R_t,n+1 H_n+1,n and
/// B_tn1 = -R_tn H_n,n+1 where R is the local inverse restricted to rows.
struct GreenBlockSet
{
  int n = 0;
  Index panel = 0;
  bool has_top = false, has_bottom = false;
  std::array<std::array<BlockOp, 2>, 4> down, up;

  std::uint64_t touches() const;
};

GreenBlockSet compute_green_blocks(const Subdomain &s, const PlrOptions &plr = {});

/// Samples of the blocks-based representation.
class BlockGreen final : public BoundaryGreen
{
public:
  explicit BlockGreen(std::vector<GreenBlockSet> blocks) : blocks_(std::move(blocks)) {}
  int count() const override { return int(blocks_.size()); }
  Index panel_size() const override { return blocks_.front().panel; }
  void apply(int s, const BoundaryData &bd, unsigned targets, RowSamples &out) const override;
  const GreenBlockSet &blocks(int s) const { return blocks_[std::size_t(s)]; }

private:
  std::vector<GreenBlockSet> blocks_;
};

/// Interface-to-interface Green matrix G(z_j, z_k) including the h quadrature
/// weight: h times the delta-scaled local inverse between rows k and j.
CMatrix green_matrix(const Subdomain &s, int target_depth, int source_depth);

/// Green matrices from one source depth to several target depths, computed
/// with one multi right-hand side solve.
std::vector<CMatrix> green_columns(const Subdomain &s, int source_depth,
                                   const std::vector<int> &target_depths);

CVector incomplete_green_down(const GreenBlockSet &b, const CVector &v0, const CVector &v1,
                              TargetRow target);
CVector incomplete_green_up(const GreenBlockSet &b, const CVector &vn, const CVector &vn1,
                            TargetRow target);

/// Divided-difference forms built from green_matrix; these coincide with the
/// block forms for finite differences.
CVector incomplete_green_down_dd(const Subdomain &s, const CVector &v0, const CVector &v1,
                                 int target_depth);
CVector incomplete_green_up_dd(const Subdomain &s, const CVector &vn, const CVector &vn1,
                               int target_depth);

/// Row k of the local solve with source f (local storage).
CVector newton_potential(const Subdomain &s, const CVector &f, int k);

/// Local field from boundary traces and volume source: one solve with the
/// equivalent boundary sources added to f.
CVector grf_reconstruct(const Subdomain &s, const CVector *u0, const CVector *u1,
                        const CVector *un, const CVector *un1, const CVector &f);

}  // namespace nestedpt

#endif  // NESTEDPT_GREEN_OPS_HPP
