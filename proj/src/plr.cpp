// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/plr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

namespace nestedpt
{

static_assert(std::endian::native == std::endian::little,
              "artifact blobs are written in host order, which must be little-endian");

namespace
{

CMatrix gaussian(Index r, Index c, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  CMatrix M(r, c);
  for (Index j = 0; j < c; ++j)
  {
    for (Index i = 0; i < r; ++i)
    {
      const double re = nd(rng);
      M(i, j) = cplx(re, nd(rng));
    }
  }
  return M;
}

CMatrix orthonormal_basis(const CMatrix &Y)
{
  Eigen::HouseholderQR<CMatrix> qr(Y);
  return qr.householderQ() * CMatrix::Identity(Y.rows(), std::min(Y.rows(), Y.cols()));
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b)
{
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
  return a;
}

// Power iteration estimate of ||B - U Vt||_2.
template <class Block>
double error_norm(const Block &B, const CMatrix &U, const CMatrix &Vt, int iters,
                  std::uint64_t seed)
{
  CVector v = gaussian(B.cols(), 1, seed).col(0);
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < iters; ++it)
  {
    CVector w = B * v;
    if (U.cols() > 0)
    {
      w.noalias() -= U * (Vt * v);
    }
    CVector u = B.adjoint() * w;
    if (U.cols() > 0)
    {
      u.noalias() -= Vt.adjoint() * (U.adjoint() * w);
    }
    const double nu = u.norm();
    est = std::sqrt(nu);
    if (nu == 0.0)
    {
      break;
    }
    v = u / nu;
  }
  return est;
}

template <class Block>
double norm_estimate(const Block &B, int iters, std::uint64_t seed)
{
  const CMatrix none(B.rows(), 0), none_t(0, B.cols());
  return error_norm(B, none, none_t, iters, seed);
}

}  // namespace

PlrMatrix PlrMatrix::compress(const CMatrix &A, double eps, int max_rank, const PlrOptions &opt)
{
  if (!(eps > 0.0 && eps < 1.0))
  {
    throw ConfigError("PLR tolerance must lie in (0, 1)");
  }
  if (max_rank < 1)
  {
    throw ConfigError("PLR rank cap must be at least 1");
  }
  PlrMatrix M;
  M.rows_ = A.rows();
  M.cols_ = A.cols();
  M.eps_ = eps;
  M.max_rank_ = max_rank;
  PlrOptions o = opt;
  o.eps = eps;
  o.max_rank = max_rank;
  M.build(A, 0, 0, A.rows(), A.cols(), o);
  M.count_touches();
  return M;
}

int PlrMatrix::build(const CMatrix &A, Index r0, Index c0, Index nr, Index nc,
                     const PlrOptions &opt)
{
  const int id = int(nodes_.size());
  nodes_.push_back(Node{});
  nodes_[std::size_t(id)].r0 = r0;
  nodes_[std::size_t(id)].c0 = c0;
  nodes_[std::size_t(id)].nr = nr;
  nodes_[std::size_t(id)].nc = nc;
  const auto B = A.block(r0, c0, nr, nc);

  // Low-rank attempt, only when a rank max_rank leaf would be cheaper.
  const Index kmax = std::min<Index>(opt.max_rank, std::min(nr, nc));
  if (kmax * (nr + nc) < nr * nc)
  {
    const std::uint64_t seed = mix(mix(opt.seed, std::uint64_t(r0)), mix(std::uint64_t(c0), std::uint64_t(nr * 131 + nc)));
    const Index l = std::min<Index>(kmax + opt.oversample, std::min(nr, nc));
    CMatrix Q = orthonormal_basis(B * gaussian(nc, l, seed));
    for (int it = 0; it < opt.power_iters; ++it)
    {
      const CMatrix Z = orthonormal_basis(B.adjoint() * Q);
      Q = orthonormal_basis(B * Z);
    }
    const CMatrix C = Q.adjoint() * B;
    Eigen::JacobiSVD<CMatrix> svd(C, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto &s = svd.singularValues();
    const double s1 = s.size() ? s[0] : 0.0;
    Index r = 0;
    while (r < s.size() && s[r] > 0.5 * opt.eps * s1)
    {
      ++r;
    }
    if (r <= kmax)
    {
      CMatrix U = Q * svd.matrixU().leftCols(r) * s.head(r).asDiagonal();
      CMatrix Vt = svd.matrixV().leftCols(r).adjoint();
      bool ok = s1 == 0.0;
      if (!ok)
      {
        const double bn = std::max(s1, norm_estimate(B, 8, seed + 1));
        ok = error_norm(B, U, Vt, opt.certify_iters, seed + 2) <= opt.eps * bn;
      }
      if (ok)
      {
        Node &nd = nodes_[std::size_t(id)];
        nd.lowrank = true;
        nd.U = std::move(U);
        nd.Vt = std::move(Vt);
        return id;
      }
    }
  }

  // Split the longer dimension, or store a dense leaf at the minimum size.
  if (std::max(nr, nc) >= 2 * opt.min_leaf)
  {
    int a, b;
    if (nr >= nc)
    {
      const Index h = nr / 2;
      a = build(A, r0, c0, h, nc, opt);
      b = build(A, r0 + h, c0, nr - h, nc, opt);
    }
    else
    {
      const Index h = nc / 2;
      a = build(A, r0, c0, nr, h, opt);
      b = build(A, r0, c0 + h, nr, nc - h, opt);
    }
    nodes_[std::size_t(id)].child[0] = a;
    nodes_[std::size_t(id)].child[1] = b;
    return id;
  }
  nodes_[std::size_t(id)].D = B;
  return id;
}

void PlrMatrix::count_touches()
{
  touches_ = 0;
  for (const Node &n : nodes_)
  {
    if (!n.leaf())
    {
      continue;
    }
    touches_ += n.lowrank ? std::uint64_t(n.U.cols()) * std::uint64_t(n.nr + n.nc)
                          : std::uint64_t(n.nr) * std::uint64_t(n.nc);
  }
}

void PlrMatrix::apply_add(const cplx *x, cplx *y, cplx alpha) const
{
  for (const Node &n : nodes_)
  {
    if (!n.leaf())
    {
      continue;
    }
    Eigen::Map<const CVector> xs(x + n.c0, n.nc);
    Eigen::Map<CVector> ys(y + n.r0, n.nr);
    if (n.lowrank)
    {
      if (n.U.cols() > 0)
      {
        ys.noalias() += alpha * (n.U * (n.Vt * xs));
      }
    }
    else
    {
      ys.noalias() += alpha * (n.D * xs);
    }
  }
  touches::add(touches_);
}

CVector PlrMatrix::matvec(const CVector &x) const
{
  if (x.size() != cols_)
  {
    throw ConfigError("PLR matvec: vector length does not match the column count");
  }
  CVector y = CVector::Zero(rows_);
  apply_add(x.data(), y.data());
  return y;
}

CMatrix PlrMatrix::dense() const
{
  CMatrix A = CMatrix::Zero(rows_, cols_);
  for (const Node &n : nodes_)
  {
    if (n.leaf())
    {
      A.block(n.r0, n.c0, n.nr, n.nc) = n.lowrank ? CMatrix(n.U * n.Vt) : n.D;
    }
  }
  return A;
}

int PlrMatrix::depth() const
{
  if (nodes_.empty())
  {
    return 0;
  }
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
  {
    for (int c : nodes_[i].child)
    {
      if (c >= 0)
      {
        d[std::size_t(c)] = d[i] + 1;
        best = std::max(best, d[std::size_t(c)]);
      }
    }
  }
  return best;
}

int PlrMatrix::leaf_count() const
{
  return int(std::count_if(nodes_.begin(), nodes_.end(), [](const Node &n) { return n.leaf(); }));
}

int PlrMatrix::lowrank_leaf_count() const
{
  return int(std::count_if(nodes_.begin(), nodes_.end(),
                           [](const Node &n) { return n.leaf() && n.lowrank; }));
}

double PlrMatrix::certify(const CMatrix &A, int iters, std::uint64_t seed) const
{
  double worst = 0.0;
  for (const Node &n : nodes_)
  {
    if (!n.leaf() || !n.lowrank)
    {
      continue;
    }
    const auto B = A.block(n.r0, n.c0, n.nr, n.nc);
    const double bn = norm_estimate(B, iters, seed);
    const double en = error_norm(B, n.U, n.Vt, iters, seed + 1);
    worst = std::max(worst, bn > 0.0 ? en / bn : en);
  }
  return worst;
}

// --- serialization -----------------------------------------------------------

namespace
{

template <class T>
void put(std::ostream &os, const T &v)
{
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <class T>
T get(std::istream &is)
{
  T v{};
  is.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!is)
  {
    throw NumericalError("truncated PLR blob");
  }
  return v;
}

void put_matrix(std::ostream &os, const CMatrix &M)
{
  put<std::int64_t>(os, M.rows());
  put<std::int64_t>(os, M.cols());
  os.write(reinterpret_cast<const char *>(M.data()), std::streamsize(M.size() * sizeof(cplx)));
}

CMatrix get_matrix(std::istream &is)
{
  const auto r = get<std::int64_t>(is), c = get<std::int64_t>(is);
  CMatrix M(r, c);
  is.read(reinterpret_cast<char *>(M.data()), std::streamsize(M.size() * sizeof(cplx)));
  if (!is)
  {
    throw NumericalError("truncated PLR blob");
  }
  return M;
}

constexpr char kMagic[8] = {'N', 'P', 'T', 'P', 'L', 'R', '0', '1'};

}  // namespace

void PlrMatrix::write(std::ostream &os) const
{
  os.write(kMagic, 8);
  put<std::int64_t>(os, rows_);
  put<std::int64_t>(os, cols_);
  put<double>(os, eps_);
  put<std::int32_t>(os, max_rank_);
  put<std::int64_t>(os, std::int64_t(nodes_.size()));
  for (const Node &n : nodes_)
  {
    put<std::int64_t>(os, n.r0);
    put<std::int64_t>(os, n.c0);
    put<std::int64_t>(os, n.nr);
    put<std::int64_t>(os, n.nc);
    put<std::int32_t>(os, n.child[0]);
    put<std::int32_t>(os, n.child[1]);
    const std::uint8_t kind = !n.leaf() ? 0 : (n.lowrank ? 2 : 1);
    put<std::uint8_t>(os, kind);
    if (kind == 1)
    {
      put_matrix(os, n.D);
    }
    else if (kind == 2)
    {
      put_matrix(os, n.U);
      put_matrix(os, n.Vt);
    }
  }
}

PlrMatrix PlrMatrix::read(std::istream &is)
{
  char magic[8];
  is.read(magic, 8);
  if (!is || !std::equal(magic, magic + 8, kMagic))
  {
    throw NumericalError("not a PLR blob");
  }
  PlrMatrix M;
  M.rows_ = get<std::int64_t>(is);
  M.cols_ = get<std::int64_t>(is);
  M.eps_ = get<double>(is);
  M.max_rank_ = get<std::int32_t>(is);
  const auto count = get<std::int64_t>(is);
  M.nodes_.resize(std::size_t(count));
  for (Node &n : M.nodes_)
  {
    n.r0 = get<std::int64_t>(is);
    n.c0 = get<std::int64_t>(is);
    n.nr = get<std::int64_t>(is);
    n.nc = get<std::int64_t>(is);
    n.child[0] = get<std::int32_t>(is);
    n.child[1] = get<std::int32_t>(is);
    const auto kind = get<std::uint8_t>(is);
    if (kind == 1)
    {
      n.D = get_matrix(is);
    }
    else if (kind == 2)
    {
      n.lowrank = true;
      n.U = get_matrix(is);
      n.Vt = get_matrix(is);
    }
  }
  M.count_touches();
  return M;
}

// --- BlockOp -------------------------------------------------------------------

BlockOp BlockOp::make(CMatrix dense, const PlrOptions &opt)
{
  BlockOp op;
  if (opt.enabled && dense.rows() >= opt.threshold && dense.size() > 0)
  {
    op.plr_ = std::make_shared<const PlrMatrix>(
      PlrMatrix::compress(dense, opt.eps, std::max(1, opt.max_rank), opt));
  }
  else
  {
    op.dense_ = std::move(dense);
  }
  return op;
}

void BlockOp::write(std::ostream &os) const
{
  put<std::uint8_t>(os, plr_ ? 1 : 0);
  if (plr_)
  {
    plr_->write(os);
  }
  else
  {
    put_matrix(os, dense_);
  }
}

BlockOp BlockOp::read(std::istream &is)
{
  BlockOp op;
  if (get<std::uint8_t>(is) == 1)
  {
    op.plr_ = std::make_shared<const PlrMatrix>(PlrMatrix::read(is));
  }
  else
  {
    op.dense_ = get_matrix(is);
  }
  return op;
}

void BlockOp::apply_add(const CVector &x, Eigen::Ref<CVector> y, cplx alpha) const
{
  if (x.size() != cols() || y.size() != rows())
  {
    throw ConfigError("interface operator applied to a panel of the wrong size");
  }
  if (plr_)
  {
    plr_->apply_add(x.data(), y.data(), alpha);
    return;
  }
  y.noalias() += alpha * (dense_ * x);
  touches::add(std::uint64_t(dense_.size()));
}

CVector BlockOp::apply(const CVector &x) const
{
  CVector y = CVector::Zero(rows());
  apply_add(x, y);
  return y;
}

std::uint64_t BlockOp::touches() const
{
  return plr_ ? plr_->touches() : std::uint64_t(dense_.size());
}

// --- fits ----------------------------------------------------------------------

AlphaFit estimate_alpha(const std::vector<double> &n, const std::vector<double> &touches)
{
  if (n.size() != touches.size() || n.size() < 3)
  {
    throw ConfigError("alpha fit needs at least three (size, touches) samples");
  }
  const auto [lo, hi] = std::minmax_element(n.begin(), n.end());
  if (*hi < 4.0 * *lo)
  {
    throw ConfigError("alpha fit needs sizes spanning at least a factor of four");
  }
  const std::size_t m = n.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i)
  {
    const double x = std::log(n[i]), y = std::log(touches[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  AlphaFit f;
  f.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / double(m);
  double ss = 0;
  for (std::size_t i = 0; i < m; ++i)
  {
    const double r = std::log(touches[i]) - (f.intercept + f.slope * std::log(n[i]));
    ss += r * r;
  }
  f.residual = std::sqrt(ss / double(m));
  f.alpha = 0.5 * f.slope;
  return f;
}

}  // namespace nestedpt
