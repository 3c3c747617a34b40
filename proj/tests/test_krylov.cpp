// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "nestedpt/krylov.hpp"
#include "test_util.hpp"

using namespace nestedpt;
using fixtures::random_vector;
using fixtures::rel_err;

namespace
{

CMatrix well_conditioned(Index n, unsigned seed, double spread = 0.2)
{
  CMatrix A(n, n);
  for (Index j = 0; j < n; ++j)
  {
    A.col(j) = spread * random_vector(n, seed + unsigned(j));
  }
  A.diagonal().array() += cplx(2.0, 0.5);
  return A;
}

LinearMap as_map(const CMatrix &A)
{
  return [&A](const CVector &x) { return CVector(A * x); };
}

}  // namespace

TEST(Gmres, IdentityConvergesInOneIteration)
{
  const LinearMap id = [](const CVector &x) { return x; };
  const CVector b = random_vector(7, 1);
  const KrylovResult r = gmres(id, {}, b, KrylovConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1.0);
  EXPECT_LT(rel_err(r.x, b), 1e-14);
}

TEST(Gmres, SmallDenseSystem)
{
  const CMatrix A = well_conditioned(5, 3);
  const CVector b = random_vector(5, 9);
  KrylovConfig cfg;
  cfg.ktol = 1e-13;
  const KrylovResult r = gmres(as_map(A), {}, b, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(rel_err(r.x, CVector(A.partialPivLu().solve(b))), 1e-10);
}

TEST(Gmres, HistoryIsMonotone)
{
  const CMatrix A = well_conditioned(40, 5);
  const KrylovResult r = gmres(as_map(A), {}, random_vector(40, 2), KrylovConfig{});
  ASSERT_GT(r.history.size(), 2u);
  for (std::size_t i = 1; i < r.history.size(); ++i)
  {
    EXPECT_LE(r.history[i], r.history[i - 1] * (1.0 + 1e-12));
  }
}

TEST(Gmres, LeftPreconditioning)
{
  const CMatrix A = well_conditioned(30, 11);
  const CMatrix Ainv = A.inverse();
  const LinearMap P = [&Ainv](const CVector &x) { return CVector(Ainv * x); };
  const CVector b = random_vector(30, 4);
  const KrylovResult r = gmres(as_map(A), P, b, KrylovConfig{});
  EXPECT_LE(r.iterations, 2.0);
  EXPECT_LT(rel_err(r.x, CVector(Ainv * b)), 1e-10);
}

TEST(Gmres, RestartStillConverges)
{
  // Spectrum well inside the right half plane so short cycles make progress.
  const CMatrix A = well_conditioned(60, 21, 0.05);
  const CVector b = random_vector(60, 5);
  KrylovConfig cfg;
  cfg.restart = 5;
  cfg.ktol = 1e-10;
  const KrylovResult r = gmres(as_map(A), {}, b, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_LT((A * r.x - b).norm() / b.norm(), 1e-9);
}

TEST(Gmres, ZeroRhs)
{
  const CMatrix A = well_conditioned(5, 3);
  const KrylovResult r = gmres(as_map(A), {}, CVector::Zero(5), KrylovConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0.0);
  EXPECT_EQ(r.x.norm(), 0.0);
}

TEST(Gmres, HitsIterationCap)
{
  const CMatrix A = well_conditioned(50, 8);
  KrylovConfig cfg;
  cfg.max_iter = 3;
  const KrylovResult r = gmres(as_map(A), {}, random_vector(50, 1), cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3.0);
  EXPECT_EQ(r.history.size(), 4u);
}

TEST(Krylov, RejectsBadConfig)
{
  const LinearMap id = [](const CVector &x) { return x; };
  KrylovConfig cfg;
  cfg.ktol = 0.0;
  EXPECT_THROW(gmres(id, {}, CVector::Ones(3), cfg), ConfigError);
  cfg = KrylovConfig{};
  cfg.max_iter = 0;
  EXPECT_THROW(bicgstab(id, {}, CVector::Ones(3), cfg), ConfigError);
  EXPECT_THROW(parse_krylov_method("cg"), ConfigError);
  EXPECT_EQ(parse_krylov_method("bicgstab"), KrylovMethod::bicgstab);
}

TEST(Bicgstab, IdentityTakesAHalfStep)
{
  const LinearMap id = [](const CVector &x) { return x; };
  const KrylovResult r = bicgstab(id, {}, random_vector(6, 2), KrylovConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0.5);
}

TEST(Bicgstab, MatchesGmres)
{
  const CMatrix A = well_conditioned(30, 17);
  const CVector b = random_vector(30, 6);
  KrylovConfig cfg;
  cfg.ktol = 1e-12;
  const KrylovResult g = gmres(as_map(A), {}, b, cfg);
  cfg.method = KrylovMethod::bicgstab;
  const KrylovResult s = krylov_solve(as_map(A), {}, b, cfg);
  EXPECT_TRUE(s.converged);
  EXPECT_LT(rel_err(s.x, g.x), 1e-8);
  // Each full BiCGstab step costs two operator applications.
  EXPECT_LE(s.iterations, g.iterations);
}

TEST(Krylov, ErrorKeepsHistory)
{
  const KrylovError e("stalled", {1.0, 0.5});
  EXPECT_EQ(e.history().size(), 2u);
  EXPECT_STREQ(e.what(), "stalled");
}
