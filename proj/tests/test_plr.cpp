// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "nestedpt/green_ops.hpp"
#include "test_util.hpp"

using namespace nestedpt;
using fixtures::random_vector;
using fixtures::rel_err;

namespace
{

// Spectral norm by power iteration on A^* A.
double spectral_norm(const CMatrix &A)
{
  CVector v = random_vector(A.cols(), 99);
  double s = 0.0;
  for (int it = 0; it < 60; ++it)
  {
    v = A.adjoint() * (A * v);
    s = std::sqrt(v.norm());
    v.normalize();
  }
  return s;
}

// Green block of a 32-wide interface: layer row 1 seen from row n.
CMatrix green_block(int nx)
{
  const Problem pb = Problem::make(fixtures::smooth_model(nx, 24, 0), 18.0);
  Problem p = pb;
  p.grid.npml = 0;
  const Problem q = Problem::make(fixtures::smooth_model(nx, 24, 8), 18.0);
  const Subdomain s(q, global_patch(q), Axis::z, partition_layers(q.grid, 2), 0);
  return green_matrix(s, 1, s.n());
}

}  // namespace

TEST(Plr, RankOneIsASingleLeaf)
{
  const CVector u = random_vector(64, 1), v = random_vector(48, 2);
  const CMatrix A = u * v.transpose();
  PlrOptions opt;
  opt.min_leaf = 16;
  const PlrMatrix P = PlrMatrix::compress(A, 1e-8, 4, opt);
  EXPECT_EQ(P.leaf_count(), 1);
  EXPECT_EQ(P.lowrank_leaf_count(), 1);
  EXPECT_EQ(P.nodes().front().U.cols(), 1);
  EXPECT_LT(rel_err(P.dense(), A), 1e-12);
  EXPECT_LT(P.touches(), std::uint64_t(A.size()));
}

TEST(Plr, IdentityKeepsDiagonalLeavesDense)
{
  const CMatrix I = CMatrix::Identity(64, 64);
  const PlrMatrix P = PlrMatrix::compress(I, 1e-8, 1);
  for (const auto &n : P.nodes())
  {
    if (!n.leaf())
    {
      continue;
    }
    const bool diagonal = n.r0 < n.c0 + n.nc && n.c0 < n.r0 + n.nr;
    if (diagonal)
    {
      EXPECT_FALSE(n.lowrank);
    }
    else if (n.lowrank)
    {
      // Zero off-diagonal blocks compress to rank zero.
      EXPECT_EQ(n.U.cols(), 0);
    }
  }
  EXPECT_LT(rel_err(P.dense(), I), 1e-15);
}

TEST(Plr, GreenBlockMeetsTolerance)
{
  const CMatrix G = green_block(32);
  const double eps = 1e-8;
  const PlrMatrix P = PlrMatrix::compress(G, eps, 8);
  EXPECT_LE(P.certify(G, 20), eps);
  EXPECT_LE(spectral_norm(P.dense() - G), 10 * eps * spectral_norm(G));
  for (unsigned seed = 1; seed <= 3; ++seed)
  {
    const CVector x = random_vector(G.cols(), seed);
    EXPECT_LE((P.matvec(x) - G * x).norm(), 10 * eps * spectral_norm(G) * x.norm());
  }
  // Columns are reproduced from unit vectors.
  CVector e = CVector::Zero(G.cols());
  e[3] = 1.0;
  EXPECT_LT((P.matvec(e) - G.col(3)).norm(), 10 * eps * spectral_norm(G));
}

TEST(Plr, ZeroVector)
{
  const CMatrix G = green_block(32);
  const PlrMatrix P = PlrMatrix::compress(G, 1e-8, 8);
  EXPECT_EQ(P.matvec(CVector::Zero(G.cols())).norm(), 0.0);
}

TEST(Plr, TouchCountBelowDenseWhenAnyLeafIsLowRank)
{
  const CMatrix G = green_block(64);
  const PlrMatrix P = PlrMatrix::compress(G, 1e-8, 8);
  if (P.lowrank_leaf_count() > 0)
  {
    EXPECT_LT(P.touches(), std::uint64_t(G.size()));
  }
  EXPECT_GT(P.lowrank_leaf_count(), 0);
}

TEST(Plr, Deterministic)
{
  const CMatrix G = green_block(32);
  const PlrMatrix a = PlrMatrix::compress(G, 1e-8, 8), b = PlrMatrix::compress(G, 1e-8, 8);
  EXPECT_EQ((a.dense() - b.dense()).norm(), 0.0);
}

TEST(Plr, SerializationRoundTrip)
{
  const CMatrix G = green_block(32);
  const PlrMatrix P = PlrMatrix::compress(G, 1e-8, 8);
  std::stringstream ss;
  P.write(ss);
  const PlrMatrix Q = PlrMatrix::read(ss);
  EXPECT_EQ((P.dense() - Q.dense()).norm(), 0.0);
  EXPECT_EQ(P.touches(), Q.touches());
  std::stringstream bad("not a plr blob");
  EXPECT_THROW(PlrMatrix::read(bad), std::exception);
}

TEST(Plr, MatvecShapeMismatch)
{
  const PlrMatrix P = PlrMatrix::compress(CMatrix::Identity(20, 20), 1e-8, 2);
  EXPECT_THROW(P.matvec(CVector::Zero(7)), ConfigError);
}

TEST(BlockOp, CompressesOnlyAboveThreshold)
{
  PlrOptions opt;
  opt.enabled = true;
  opt.max_rank = 8;
  opt.threshold = 64;
  const BlockOp small = BlockOp::make(CMatrix::Identity(32, 32), opt);
  EXPECT_FALSE(small.compressed());
  const BlockOp big = BlockOp::make(green_block(64), opt);
  EXPECT_TRUE(big.compressed());
  opt.enabled = false;
  EXPECT_FALSE(BlockOp::make(green_block(64), opt).compressed());
}

TEST(Alpha, DenseAndRankOneFamilies)
{
  std::vector<double> n, dense, rank1;
  for (int k : {32, 64, 128, 256})
  {
    n.push_back(k);
    dense.push_back(double(k) * k);
    rank1.push_back(2.0 * k);
  }
  EXPECT_NEAR(estimate_alpha(n, dense).alpha, 1.0, 0.05);
  EXPECT_NEAR(estimate_alpha(n, rank1).alpha, 0.5, 0.05);
  EXPECT_NEAR(estimate_alpha(n, dense).residual, 0.0, 1e-12);
}

TEST(Alpha, NeedsEnoughSamples)
{
  EXPECT_THROW(estimate_alpha({32, 64}, {1, 2}), ConfigError);
  EXPECT_THROW(estimate_alpha({32, 40, 48}, {1, 2, 3}), ConfigError);
}
