// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/krylov.hpp"

#include <cmath>

namespace nestedpt
{

KrylovMethod parse_krylov_method(const std::string &s)
{
  if (s == "gmres")
  {
    return KrylovMethod::gmres;
  }
  if (s == "bicgstab")
  {
    return KrylovMethod::bicgstab;
  }
  throw ConfigError("unknown Krylov method '" + s + "'");
}

std::string to_string(KrylovMethod m) { return m == KrylovMethod::gmres ? "gmres" : "bicgstab"; }

namespace
{

void check_config(const KrylovConfig &cfg)
{
  if (!(cfg.ktol > 0.0) || cfg.max_iter < 1 || cfg.restart < 0)
  {
    throw ConfigError("Krylov configuration needs ktol > 0, max_iter >= 1 and restart >= 0");
  }
}

CVector apply_prec(const LinearMap &P, const CVector &v) { return P ? P(v) : v; }

// Complex Givens rotation zeroing b in (a, b).
void givens(cplx a, cplx b, double &c, cplx &s)
{
  const double na = std::abs(a), nb = std::abs(b);
  if (nb == 0.0)
  {
    c = 1.0;
    s = 0.0;
    return;
  }
  if (na == 0.0)
  {
    c = 0.0;
    s = std::conj(b) / nb;
    return;
  }
  const double r = std::hypot(na, nb);
  c = na / r;
  s = (a / na) * std::conj(b) / r;
}

}  // namespace

KrylovResult gmres(const LinearMap &op, const LinearMap &precond, const CVector &rhs,
                   const KrylovConfig &cfg)
{
  check_config(cfg);
  KrylovResult res;
  res.x = CVector::Zero(rhs.size());
  const CVector pb = apply_prec(precond, rhs);
  const double beta0 = pb.norm();
  res.history.push_back(beta0 == 0.0 ? 0.0 : 1.0);
  if (beta0 == 0.0)
  {
    res.converged = true;
    return res;
  }

  const int m = cfg.restart > 0 ? cfg.restart : cfg.max_iter;
  int total = 0;
  CVector r = pb;
  while (total < cfg.max_iter)
  {
    const double beta = r.norm();
    std::vector<CVector> V;
    V.push_back(r / beta);
    CMatrix Hm = CMatrix::Zero(m + 1, m);
    std::vector<double> cs(static_cast<std::size_t>(m));
    std::vector<cplx> sn(static_cast<std::size_t>(m));
    CVector g = CVector::Zero(m + 1);
    g[0] = beta;
    int j = 0;
    bool done = false;
    for (; j < m && total < cfg.max_iter; ++j)
    {
      CVector w = apply_prec(precond, op(V[std::size_t(j)]));
      const double wnorm0 = w.norm();
      for (int i = 0; i <= j; ++i)
      {
        Hm(i, j) = V[std::size_t(i)].dot(w);
        w -= Hm(i, j) * V[std::size_t(i)];
      }
      const double hn = w.norm();
      Hm(j + 1, j) = hn;
      for (int i = 0; i < j; ++i)
      {
        const cplx a = Hm(i, j), b = Hm(i + 1, j);
        Hm(i, j) = cs[std::size_t(i)] * a + sn[std::size_t(i)] * b;
        Hm(i + 1, j) = -std::conj(sn[std::size_t(i)]) * a + cs[std::size_t(i)] * b;
      }
      givens(Hm(j, j), Hm(j + 1, j), cs[std::size_t(j)], sn[std::size_t(j)]);
      const cplx a = Hm(j, j), b = Hm(j + 1, j);
      Hm(j, j) = cs[std::size_t(j)] * a + sn[std::size_t(j)] * b;
      Hm(j + 1, j) = 0.0;
      g[j + 1] = -std::conj(sn[std::size_t(j)]) * g[j];
      g[j] = cs[std::size_t(j)] * g[j];
      ++total;
      const double rel = std::abs(g[j + 1]) / beta0;
      res.history.push_back(rel);
      if (rel <= cfg.ktol)
      {
        done = true;
        ++j;
        break;
      }
      if (hn <= 1e-14 * std::max(wnorm0, 1e-300))
      {
        // Invariant subspace reached: the current iterate is exact.
        res.breakdown = true;
        done = true;
        ++j;
        break;
      }
      V.push_back(w / hn);
    }
    // Back substitution on the triangular j x j system.
    CVector y = CVector::Zero(j);
    for (int i = j - 1; i >= 0; --i)
    {
      cplx acc = g[i];
      for (int k = i + 1; k < j; ++k)
      {
        acc -= Hm(i, k) * y[k];
      }
      y[i] = acc / Hm(i, i);
    }
    for (int i = 0; i < j; ++i)
    {
      res.x += y[i] * V[std::size_t(i)];
    }
    res.basis_size = j;
    if (done)
    {
      res.converged = res.history.back() <= cfg.ktol || res.breakdown;
      break;
    }
    if (total >= cfg.max_iter)
    {
      break;
    }
    r = pb - apply_prec(precond, op(res.x));
  }
  res.iterations = total;
  return res;
}

KrylovResult bicgstab(const LinearMap &op, const LinearMap &precond, const CVector &rhs,
                      const KrylovConfig &cfg)
{
  check_config(cfg);
  KrylovResult res;
  res.x = CVector::Zero(rhs.size());
  CVector r = apply_prec(precond, rhs);
  const double b0 = r.norm();
  res.history.push_back(b0 == 0.0 ? 0.0 : 1.0);
  if (b0 == 0.0)
  {
    res.converged = true;
    return res;
  }
  const CVector rhat = r;
  cplx rho = 1.0, alpha = 1.0, omega = 1.0;
  CVector v = CVector::Zero(r.size()), p = CVector::Zero(r.size());
  for (int it = 0; it < cfg.max_iter; ++it)
  {
    const cplx rho_new = rhat.dot(r);
    if (rho_new == cplx(0.0))
    {
      res.breakdown = true;
      break;
    }
    const cplx beta = (rho_new / rho) * (alpha / omega);
    p = r + beta * (p - omega * v);
    v = apply_prec(precond, op(p));
    const cplx denom = rhat.dot(v);
    if (denom == cplx(0.0))
    {
      res.breakdown = true;
      break;
    }
    alpha = rho_new / denom;
    CVector s = r - alpha * v;
    res.x += alpha * p;
    const double srel = s.norm() / b0;
    res.history.push_back(srel);
    if (srel <= cfg.ktol)
    {
      res.iterations = it + 0.5;
      res.converged = true;
      return res;
    }
    const CVector t = apply_prec(precond, op(s));
    const double tt = t.squaredNorm();
    if (tt == 0.0)
    {
      res.breakdown = true;
      res.iterations = it + 0.5;
      break;
    }
    omega = t.dot(s) / tt;
    res.x += omega * s;
    r = s - omega * t;
    rho = rho_new;
    const double rrel = r.norm() / b0;
    res.history.push_back(rrel);
    res.iterations = it + 1;
    if (rrel <= cfg.ktol)
    {
      res.converged = true;
      return res;
    }
  }
  return res;
}

KrylovResult krylov_solve(const LinearMap &op, const LinearMap &precond, const CVector &rhs,
                          const KrylovConfig &cfg)
{
  return cfg.method == KrylovMethod::gmres ? gmres(op, precond, rhs, cfg)
                                           : bicgstab(op, precond, rhs, cfg);
}

}  // namespace nestedpt
