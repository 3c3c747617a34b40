// SPDX-License-Identifier: Apache-2.0

#ifndef NESTEDPT_KRYLOV_HPP
#define NESTEDPT_KRYLOV_HPP

#include <functional>
#include <string>
#include <vector>

#include "nestedpt/types.hpp"

namespace nestedpt
{

enum class KrylovMethod
{
  gmres,
  bicgstab
};

KrylovMethod parse_krylov_method(const std::string &s);
std::string to_string(KrylovMethod m);

struct KrylovConfig
{
  KrylovMethod method = KrylovMethod::gmres;
  double ktol = 1e-7;
  int max_iter = 200;
  int restart = 0;  // 0 disables restarts
};

struct KrylovResult
{
  CVector x;
  std::vector<double> history;  // relative preconditioned residuals
  double iterations = 0.0;      // BiCGstab counts half steps as 0.5
  bool converged = false;
  bool breakdown = false;
  int basis_size = 0;
};

using LinearMap = std::function<CVector(const CVector &)>;

/// Left-preconditioned GMRES with modified Gram-Schmidt, starting from zero.
/// An empty precond means the identity.
KrylovResult gmres(const LinearMap &op, const LinearMap &precond, const CVector &rhs,
                   const KrylovConfig &cfg);

/// Left-preconditioned BiCGstab; the shadow residual is the initial residual.
KrylovResult bicgstab(const LinearMap &op, const LinearMap &precond, const CVector &rhs,
                      const KrylovConfig &cfg);

KrylovResult krylov_solve(const LinearMap &op, const LinearMap &precond, const CVector &rhs,
                          const KrylovConfig &cfg);

/// Raised when a solve does not converge; keeps the residual history.
class KrylovError : public NumericalError
{
public:
  KrylovError(const std::string &what, std::vector<double> history)
    : NumericalError(what), history_(std::move(history))
  {
  }
  const std::vector<double> &history() const { return history_; }

private:
  std::vector<double> history_;
};

}  // namespace nestedpt

#endif  // NESTEDPT_KRYLOV_HPP
