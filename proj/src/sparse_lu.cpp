// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/sparse_lu.hpp"

#include <string>
#include <vector>

#include <umfpack.h>

namespace nestedpt
{

namespace
{

const double *as_real(const cplx *p) { return reinterpret_cast<const double *>(p); }
double *as_real(cplx *p) { return reinterpret_cast<double *>(p); }

void check(int status, const char *stage)
{
  if (status != UMFPACK_OK)
  {
    throw NumericalError(std::string("sparse LU ") + stage + " failed, UMFPACK status " +
                         std::to_string(status));
  }
}

}  // namespace

SparseLU::~SparseLU() { release(); }

SparseLU::SparseLU(SparseLU &&o) noexcept
  : n_(o.n_), A_(std::move(o.A_)), numeric_(o.numeric_), lnz_(o.lnz_), unz_(o.unz_)
{
  o.numeric_ = nullptr;
  o.n_ = 0;
}

SparseLU &SparseLU::operator=(SparseLU &&o) noexcept
{
  if (this != &o)
  {
    release();
    n_ = o.n_;
    A_ = std::move(o.A_);
    numeric_ = o.numeric_;
    lnz_ = o.lnz_;
    unz_ = o.unz_;
    o.numeric_ = nullptr;
    o.n_ = 0;
  }
  return *this;
}

void SparseLU::release()
{
  if (numeric_)
  {
    umfpack_zi_free_numeric(&numeric_);
    numeric_ = nullptr;
  }
}

void SparseLU::factor(const SpMat &A)
{
  if (A.rows() != A.cols())
  {
    throw ConfigError("sparse LU requires a square matrix");
  }
  release();
  A_ = A;
  A_.makeCompressed();
  n_ = A_.rows();
  const int n = static_cast<int>(n_);

  double control[UMFPACK_CONTROL];
  double info[UMFPACK_INFO];
  umfpack_zi_defaults(control);
  void *symbolic = nullptr;
  check(umfpack_zi_symbolic(n, n, A_.outerIndexPtr(), A_.innerIndexPtr(), as_real(A_.valuePtr()),
                            nullptr, &symbolic, control, info),
        "symbolic analysis");
  int status = umfpack_zi_numeric(A_.outerIndexPtr(), A_.innerIndexPtr(), as_real(A_.valuePtr()),
                                  nullptr, symbolic, &numeric_, control, info);
  umfpack_zi_free_symbolic(&symbolic);
  if (status == UMFPACK_WARNING_singular_matrix)
  {
    release();
    throw NumericalError("sparse LU: matrix is singular");
  }
  check(status, "numeric factorization");
  lnz_ = static_cast<std::int64_t>(info[UMFPACK_LNZ]);
  unz_ = static_cast<std::int64_t>(info[UMFPACK_UNZ]);
}

void SparseLU::solve(const cplx *b, cplx *x) const
{
  if (!numeric_)
  {
    throw NumericalError("sparse LU: solve before factor");
  }
  double control[UMFPACK_CONTROL];
  double info[UMFPACK_INFO];
  umfpack_zi_defaults(control);
  control[UMFPACK_IRSTEP] = 0;
  std::vector<int> wi(static_cast<std::size_t>(n_));
  std::vector<double> w(static_cast<std::size_t>(4 * n_));
  check(umfpack_zi_wsolve(UMFPACK_A, A_.outerIndexPtr(), A_.innerIndexPtr(),
                          as_real(A_.valuePtr()), nullptr, as_real(x), nullptr, as_real(b), nullptr,
                          numeric_, control, info, wi.data(), w.data()),
        "solve");
}

CVector SparseLU::solve(const CVector &b) const
{
  CVector x(n_);
  solve(b.data(), x.data());
  return x;
}

CMatrix SparseLU::solve(const CMatrix &B) const
{
  CMatrix X(B.rows(), B.cols());
  for (Index j = 0; j < B.cols(); ++j)
  {
    solve(B.col(j).data(), X.col(j).data());
  }
  return X;
}

}  // namespace nestedpt
