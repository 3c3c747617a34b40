// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "nestedpt/green_ops.hpp"
#include "test_util.hpp"

using namespace nestedpt;
using fixtures::random_vector;
using fixtures::rel_err;

namespace
{

Problem make_problem(Scheme scheme, int nx = 16, int nz = 18, double omega = 14.0)
{
  return Problem::make(fixtures::smooth_model(nx, nz, 8), omega, scheme);
}

}  // namespace

TEST(GreenColumns, SatisfyTheLocalEquation)
{
  const Problem pb = make_problem(Scheme::fd);
  const Subdomain s(pb, global_patch(pb), Axis::z, partition_layers(pb.grid, 3), 1);
  const Index P = s.panel_size();
  const std::vector<CMatrix> G = green_columns(s, 1, {0, 1, s.n(), s.n() + 1});
  // Rebuild the full column block and apply the operator.
  CMatrix rhs = CMatrix::Zero(s.size(), P);
  rhs.middleRows(s.storage_depth(1) * P, P).setIdentity();
  const CMatrix X = s.solve(rhs);
  const CMatrix HX = s.op() * X;
  EXPECT_LT((HX - rhs).norm() / rhs.norm(), 1e-12);
  const double w = s.patch().x.h * s.delta_scale();
  EXPECT_LT(rel_err(G[2], w * X.middleRows(s.storage_depth(s.n()) * P, P)), 1e-14);
}

TEST(GreenColumns, ReciprocityForQ1)
{
  const Problem pb = make_problem(Scheme::q1, 14, 16);
  const Subdomain s(pb, global_patch(pb), Axis::z, partition_layers(pb.grid, 2), 0);
  const CMatrix a = green_matrix(s, 1, s.n());
  const CMatrix b = green_matrix(s, s.n(), 1);
  EXPECT_LT(rel_err(a, CMatrix(b.transpose())), 1e-10);
}

TEST(IncompleteGreen, ZeroPanelsGiveZero)
{
  const Problem pb = make_problem(Scheme::fd);
  const Subdomain s(pb, global_patch(pb), Axis::z, partition_layers(pb.grid, 3), 1);
  const GreenBlockSet b = compute_green_blocks(s);
  const CVector z = CVector::Zero(s.panel_size());
  EXPECT_EQ(incomplete_green_up(b, z, z, kRow1).norm(), 0.0);
  EXPECT_EQ(incomplete_green_down(b, z, z, kRowN).norm(), 0.0);
  EXPECT_THROW(incomplete_green_up(b, z, CVector::Zero(3), kRow1), ConfigError);
}

TEST(IncompleteGreen, BlockFormMatchesDividedDifferencesForFd)
{
  const Problem pb = make_problem(Scheme::fd);
  const Subdomain s(pb, global_patch(pb), Axis::z, partition_layers(pb.grid, 3), 1);
  const GreenBlockSet b = compute_green_blocks(s);
  const Index P = s.panel_size();
  const CVector v0 = random_vector(P, 1), v1 = random_vector(P, 2);
  const CVector vn = random_vector(P, 3), vn1 = random_vector(P, 4);
  for (TargetRow t : {kRow0, kRow1, kRowN, kRowN1})
  {
    const int depth = depth_of_slot(slot_of(t), s.n());
    const CVector down = incomplete_green_down(b, v0, v1, t);
    const CVector up = incomplete_green_up(b, vn, vn1, t);
    EXPECT_LT(rel_err(down, incomplete_green_down_dd(s, v0, v1, depth)), 1e-13) << t;
    EXPECT_LT(rel_err(up, incomplete_green_up_dd(s, vn, vn1, depth)), 1e-13) << t;
  }
}

TEST(IncompleteGreen, Linearity)
{
  const Problem pb = make_problem(Scheme::q1);
  const Subdomain s(pb, global_patch(pb), Axis::z, partition_layers(pb.grid, 3), 1);
  const GreenBlockSet b = compute_green_blocks(s);
  const Index P = s.panel_size();
  const CVector a0 = random_vector(P, 1), a1 = random_vector(P, 2);
  const CVector b0 = random_vector(P, 3), b1 = random_vector(P, 4);
  const cplx x(0.3, -1.2), y(2.0, 0.5);
  const CVector lhs = incomplete_green_down(b, x * a0 + y * b0, x * a1 + y * b1, kRowN);
  const CVector rhs =
    x * incomplete_green_down(b, a0, a1, kRowN) + y * incomplete_green_down(b, b0, b1, kRowN);
  EXPECT_LT(rel_err(lhs, rhs), 1e-12);
}

TEST(IncompleteGreen, UpgoingFieldIsAnnihilated)
{
  // A source in the bottom slab of a constant medium: the field entering the
  // bottom slab through its top boundary is purely up-going, so the
  // down-going integral of those traces vanishes to the PML floor.
  const Problem pb = Problem::make(fixtures::constant_model(40, 40, 12), 2.0 * M_PI * 3.0);
  const Patch gp = global_patch(pb);
  const LayerPartition part = partition_layers(pb.grid, 2);
  const Subdomain top(pb, gp, Axis::z, part, 0);
  const Subdomain bottom(pb, gp, Axis::z, part, 1);
  const CVector u = solve_global(pb, delta_source(pb, gp, 20, 32));
  const CVector ut = top.restrict_owned(gp, u), ub = bottom.restrict_owned(gp, u);
  const CVector un = top.extract(ut, top.n()), un1 = bottom.extract(ub, 1);

  const GreenBlockSet bb = compute_green_blocks(bottom);
  const CVector d = incomplete_green_down(bb, un, un1, kRow1);
  EXPECT_LT(d.norm(), 1e-3 * un1.norm());
  // The top slab holds no source, so its up-going integral reproduces the
  // field exactly.
  const GreenBlockSet bt = compute_green_blocks(top);
  EXPECT_LT(rel_err(incomplete_green_up(bt, un, un1, kRowN), un), 1e-11);
}

TEST(Newton, MatchesWeightedGreenSum)
{
  const Problem pb = make_problem(Scheme::fd);
  const Subdomain s(pb, global_patch(pb), Axis::z, partition_layers(pb.grid, 3), 1);
  const Index P = s.panel_size();
  CVector f = CVector::Zero(s.size());
  std::vector<CVector> rows;
  for (int j = 1; j <= s.n(); ++j)
  {
    rows.push_back(random_vector(P, unsigned(j)));
    f.segment(s.storage_depth(j) * P, P) = rows.back();
  }
  for (int k : {0, 1, s.n(), s.n() + 1})
  {
    CVector sum = CVector::Zero(P);
    for (int j = 1; j <= s.n(); ++j)
    {
      sum += pb.grid.h * green_matrix(s, k, j) * rows[std::size_t(j - 1)];
    }
    EXPECT_LT(rel_err(newton_potential(s, f, k), sum), 1e-12);
  }
  EXPECT_EQ(newton_potential(s, CVector::Zero(s.size()), 1).norm(), 0.0);
  const CVector w0 = random_vector(s.size(), 77);
  EXPECT_LT(rel_err(newton_potential(s, s.op() * w0, 2), s.extract(w0, 2)), 1e-11);
}

class Reconstruct : public ::testing::TestWithParam<Scheme>
{
};

TEST_P(Reconstruct, ExactTracesGiveGlobalSolution)
{
  const Problem pb = Problem::make(fixtures::smooth_model(60, 60, 10), 25.0, GetParam());
  const Patch gp = global_patch(pb);
  const LayerPartition part = partition_layers(pb.grid, 3);
  // Source in layer 2 plus a volumetric source in layer 1.
  CVector f = delta_source(pb, gp, 30, 30);
  f += 0.1 * delta_source(pb, gp, 11, 7);
  const CVector u = solve_global(pb, f);
  for (int l = 0; l < 3; ++l)
  {
    const Subdomain s(pb, gp, Axis::z, part, l);
    const Subdomain *up = nullptr;
    CVector u0, u1, un, un1;
    const CVector ul = s.restrict_owned(gp, u);
    if (s.has_top())
    {
      const Subdomain a(pb, gp, Axis::z, part, l - 1, false);
      u0 = a.extract(a.restrict_owned(gp, u), a.n());
      u1 = s.extract(ul, 1);
    }
    if (s.has_bottom())
    {
      const Subdomain b(pb, gp, Axis::z, part, l + 1, false);
      un = s.extract(ul, s.n());
      un1 = b.extract(b.restrict_owned(gp, u), 1);
    }
    (void)up;
    const CVector v = grf_reconstruct(s, s.has_top() ? &u0 : nullptr, s.has_top() ? &u1 : nullptr,
                                      s.has_bottom() ? &un : nullptr,
                                      s.has_bottom() ? &un1 : nullptr, s.restrict_owned(gp, f));
    EXPECT_LT(rel_err(s.restrict_owned(s.patch(), v), ul), 1e-10) << "layer " << l;
  }
}

INSTANTIATE_TEST_SUITE_P(Schemes, Reconstruct, ::testing::Values(Scheme::fd, Scheme::q1));

TEST(Reconstruct, ZeroDataGivesZeroField)
{
  const Problem pb = make_problem(Scheme::fd);
  const Subdomain s(pb, global_patch(pb), Axis::z, partition_layers(pb.grid, 3), 1);
  const CVector z = CVector::Zero(s.panel_size());
  EXPECT_EQ(grf_reconstruct(s, &z, &z, &z, &z, CVector::Zero(s.size())).norm(), 0.0);
}
