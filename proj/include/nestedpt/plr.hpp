// SPDX-License-Identifier: Apache-2.0

#ifndef NESTEDPT_PLR_HPP
#define NESTEDPT_PLR_HPP

#include <iosfwd>
#include <memory>
#include <vector>

#include "nestedpt/types.hpp"

namespace nestedpt
{

struct PlrOptions
{
  bool enabled = false;
  double eps = 1e-8;
  int max_rank = 0;         // 0 means ceil(sqrt(omega)), resolved by the caller
  Index threshold = 256;    // blocks with fewer rows stay dense
  Index min_leaf = 16;
  int oversample = 8;
  int power_iters = 1;
  int certify_iters = 20;
  std::uint64_t seed = 0x5eed;
};

/// Partitioned low-rank matrix: a binary block tree, each split halving the
/// longer dimension, whose leaves are dense blocks or factor pairs U Vt.
class PlrMatrix
{
public:
  struct Node
  {
    Index r0 = 0, c0 = 0, nr = 0, nc = 0;
    int child[2] = {-1, -1};
    bool lowrank = false;
    CMatrix D;      // dense leaf
    CMatrix U, Vt;  // low-rank leaf, block = U * Vt
    bool leaf() const { return child[0] < 0; }
  };

  PlrMatrix() = default;

  /// Compresses A so that every low-rank leaf satisfies
  /// ||block - U Vt||_2 <= eps ||block||_2, as certified by power iteration.
  static PlrMatrix compress(const CMatrix &A, double eps, int max_rank,
                            const PlrOptions &opt = {});

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  double eps() const { return eps_; }
  int max_rank() const { return max_rank_; }

  /// y += alpha * A x.
  void apply_add(const cplx *x, cplx *y, cplx alpha = 1.0) const;
  CVector matvec(const CVector &x) const;
  CMatrix dense() const;

  /// Scalar multiply-adds per matvec.
  std::uint64_t touches() const { return touches_; }
  int depth() const;
  int leaf_count() const;
  int lowrank_leaf_count() const;
  const std::vector<Node> &nodes() const { return nodes_; }

  /// Largest relative spectral error over low-rank leaves, estimated by
  /// power iteration against the original matrix.
  double certify(const CMatrix &A, int iters = 20, std::uint64_t seed = 7) const;

  void write(std::ostream &os) const;
  static PlrMatrix read(std::istream &is);

private:
  int build(const CMatrix &A, Index r0, Index c0, Index nr, Index nc, const PlrOptions &opt);
  void count_touches();

  Index rows_ = 0, cols_ = 0;
  double eps_ = 0.0;
  int max_rank_ = 0;
  std::uint64_t touches_ = 0;
  std::vector<Node> nodes_;  // preorder, root at 0
};

/// A dense or compressed linear map between two trace rows.
class BlockOp
{
public:
  BlockOp() = default;
  explicit BlockOp(CMatrix dense) : dense_(std::move(dense)) {}
  /// Compresses when enabled and the block has at least opt.threshold rows.
  static BlockOp make(CMatrix dense, const PlrOptions &opt);

  Index rows() const { return plr_ ? plr_->rows() : dense_.rows(); }
  Index cols() const { return plr_ ? plr_->cols() : dense_.cols(); }
  bool empty() const { return rows() == 0 || cols() == 0; }
  bool compressed() const { return bool(plr_); }
  const PlrMatrix *plr() const { return plr_.get(); }
  const CMatrix &dense_payload() const { return dense_; }
  CMatrix to_dense() const { return plr_ ? plr_->dense() : dense_; }

  /// y += alpha * A x, counting touches.
  void apply_add(const CVector &x, Eigen::Ref<CVector> y, cplx alpha = 1.0) const;
  CVector apply(const CVector &x) const;
  std::uint64_t touches() const;

  /// Tagged blob: a dense payload or an embedded PLR blob.
  void write(std::ostream &os) const;
  static BlockOp read(std::istream &is);

private:
  CMatrix dense_;
  std::shared_ptr<const PlrMatrix> plr_;
};

struct AlphaFit
{
  double alpha = 0.0;      // touches ~ n^(2 alpha)
  double slope = 0.0;      // d log(touches) / d log(n)
  double intercept = 0.0;
  double residual = 0.0;   // root mean square of the log-log fit
};

/// Least-squares fit of log(touches) against log(n).
AlphaFit estimate_alpha(const std::vector<double> &n, const std::vector<double> &touches);

}  // namespace nestedpt

#endif  // NESTEDPT_PLR_HPP
