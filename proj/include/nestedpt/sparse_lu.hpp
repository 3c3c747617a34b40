// SPDX-License-Identifier: Apache-2.0

#ifndef NESTEDPT_SPARSE_LU_HPP
#define NESTEDPT_SPARSE_LU_HPP

#include <memory>

#include "nestedpt/types.hpp"

namespace nestedpt
{

/// Multifrontal sparse LU of a complex matrix (UMFPACK backend).
///
/// Factor once, then `solve` any number of right-hand sides. `solve` is const
/// and allocates its own workspace, so concurrent calls on one factorization
/// are safe.
class SparseLU
{
public:
  SparseLU() = default;
  explicit SparseLU(const SpMat &A) { factor(A); }
  ~SparseLU();
  SparseLU(SparseLU &&) noexcept;
  SparseLU &operator=(SparseLU &&) noexcept;
  SparseLU(const SparseLU &) = delete;
  SparseLU &operator=(const SparseLU &) = delete;

  void factor(const SpMat &A);
  bool factored() const { return numeric_ != nullptr; }
  Index rows() const { return n_; }

  CVector solve(const CVector &b) const;
  CMatrix solve(const CMatrix &B) const;
  void solve(const cplx *b, cplx *x) const;

  /// Entries of L plus U, for memory reporting.
  std::int64_t factor_nnz() const { return lnz_ + unz_; }

private:
  void release();

  Index n_ = 0;
  SpMat A_;  // compressed copy; UMFPACK solves need the pattern and values
  void *numeric_ = nullptr;
  std::int64_t lnz_ = 0, unz_ = 0;
};

}  // namespace nestedpt

#endif  // NESTEDPT_SPARSE_LU_HPP
