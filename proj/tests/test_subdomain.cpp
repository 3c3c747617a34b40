// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <thread>

#include "nestedpt/subdomain.hpp"
#include "test_util.hpp"

using namespace nestedpt;
using fixtures::random_vector;
using fixtures::rel_err;

TEST(Partition, Examples)
{
  EXPECT_EQ(partition_layers(9, 3).extents, (std::vector<int>{3, 3, 3}));
  EXPECT_EQ(partition_layers(10, 3).extents, (std::vector<int>{4, 3, 3}));
  EXPECT_EQ(partition_layers(10, 3).offsets, (std::vector<int>{0, 4, 7}));
  for (int L = 1; L <= 10; ++L)
  {
    const LayerPartition p = partition_layers(60, L);
    int sum = 0, lo = 1 << 30, hi = 0;
    for (int e : p.extents)
    {
      sum += e;
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    EXPECT_EQ(sum, 60);
    EXPECT_LE(hi - lo, 1);
    EXPECT_EQ(p.interfaces(), L - 1);
  }
}

TEST(Partition, RejectsTooManyLayers)
{
  EXPECT_THROW(partition_layers(9, 5), ConfigError);
  EXPECT_THROW(partition_layers(9, 0), ConfigError);
  EXPECT_NO_THROW(partition_layers(1, 1));
}

class LayerRows : public ::testing::TestWithParam<Scheme>
{
};

TEST_P(LayerRows, InteriorRowsMatchGlobalOperatorExactly)
{
  const auto model = fixtures::jump_model(14, 15, 5);
  const Problem pb = Problem::make(model, 11.0, GetParam());
  const Patch gp = global_patch(pb);
  const SpMat H = assemble(pb, gp);
  const LayerPartition part = partition_layers(pb.grid, 3);
  for (int l = 0; l < 3; ++l)
  {
    const Subdomain s(pb, gp, Axis::z, part, l, false);
    const Patch &lp = s.patch();
    const SpMat &Hl = s.op();
    int checked = 0;
    for (int q = lp.z.first + 1; q < lp.z.last; ++q)
    {
      // Rows whose stencil lies inside the layer's physical band.
      const bool inside = q >= s.depth_node(1) && q <= s.depth_node(s.n());
      if (!inside)
      {
        continue;
      }
      for (int p = lp.x.first; p <= lp.x.last; ++p)
      {
        for (int dq = -1; dq <= 1; ++dq)
        {
          for (int dp = -1; dp <= 1; ++dp)
          {
            if (!lp.contains(p + dp, q + dq))
            {
              continue;
            }
            const cplx a = Hl.coeff(lp.index(p, q), lp.index(p + dp, q + dq));
            const cplx b = H.coeff(gp.index(p, q), gp.index(p + dp, q + dq));
            EXPECT_EQ(a, b) << "layer " << l << " node " << p << "," << q;
            ++checked;
          }
        }
      }
    }
    EXPECT_GT(checked, 0);
  }
}

TEST_P(LayerRows, CellRowsMatchLayerOperatorExactly)
{
  const auto model = fixtures::jump_model(15, 12, 5);
  const Problem pb = Problem::make(model, 11.0, GetParam());
  const Patch gp = global_patch(pb);
  const Subdomain layer(pb, gp, Axis::z, partition_layers(pb.grid, 2), 1, false);
  const Patch &lp = layer.patch();
  const LayerPartition cells = partition_layers(pb.grid.nx, 3);
  for (int c = 0; c < 3; ++c)
  {
    const Subdomain cell(pb, lp, Axis::x, cells, c, false);
    const Patch &cp = cell.patch();
    EXPECT_FALSE(cp.depth_is_z);
    for (int p = cell.depth_node(1); p <= cell.depth_node(cell.n()); ++p)
    {
      for (int q = cp.z.first; q <= cp.z.last; ++q)
      {
        if (q <= layer.depth_node(0) + 1 || q >= layer.depth_node(layer.n() + 1) - 1)
        {
          continue;
        }
        for (int dp = -1; dp <= 1; ++dp)
        {
          for (int dq = -1; dq <= 1; ++dq)
          {
            if (!cp.contains(p + dp, q + dq))
            {
              continue;
            }
            EXPECT_EQ(cell.op().coeff(cp.index(p, q), cp.index(p + dp, q + dq)),
                      layer.op().coeff(lp.index(p, q), lp.index(p + dp, q + dq)));
          }
        }
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Schemes, LayerRows, ::testing::Values(Scheme::fd, Scheme::q1));

TEST(Layer, PmlCollars)
{
  const auto model = fixtures::constant_model(12, 12, 4);
  const Problem pb = Problem::make(model, 8.0);
  const Patch gp = global_patch(pb);
  const LayerPartition part = partition_layers(pb.grid, 3);
  const Subdomain top(pb, gp, Axis::z, part, 0, false);
  const Subdomain mid(pb, gp, Axis::z, part, 1, false);
  EXPECT_FALSE(top.has_top());
  EXPECT_TRUE(top.has_bottom());
  EXPECT_EQ(top.patch().z.first, pb.grid.first());
  EXPECT_EQ(top.patch().z.left_edge, 0.0);
  EXPECT_EQ(top.patch().z.last, top.depth_node(top.n()) + pb.grid.npml);
  // Damping starts right after the ghost row n+1.
  EXPECT_EQ(top.patch().z.sigma(top.depth_node(top.n() + 1) * pb.grid.h), 0.0);
  EXPECT_GT(top.patch().z.sigma(top.depth_node(top.n() + 2) * pb.grid.h), 0.0);
  EXPECT_TRUE(mid.has_top());
  EXPECT_GT(mid.patch().z.sigma(mid.depth_node(-1) * pb.grid.h), 0.0);
  // Lateral PML is the physical one.
  EXPECT_EQ(mid.patch().x.first, pb.grid.first());
  EXPECT_EQ(mid.patch().x.last, pb.grid.last_x());
}

TEST(Layer, LocalSolveRoundTrip)
{
  const auto model = fixtures::smooth_model(20, 20, 6);
  const Problem pb = Problem::make(model, 15.0);
  const Patch gp = global_patch(pb);
  const Subdomain s(pb, gp, Axis::z, partition_layers(pb.grid, 2), 1);
  EXPECT_EQ(s.solve(CVector(CVector::Zero(s.size()))).norm(), 0.0);
  const CVector w0 = random_vector(s.size(), 3);
  const CVector rhs = s.op() * w0;
  EXPECT_LT(rel_err(s.solve(rhs), w0), 1e-12);
  const CVector w = s.solve(rhs);
  EXPECT_LT((s.op() * w - rhs).norm() / rhs.norm(), 1e-12);
  EXPECT_THROW(s.solve(CVector(CVector::Zero(s.size() + 1))), ConfigError);
}

TEST(Layer, ConcurrentSolvesAreSafe)
{
  const auto model = fixtures::smooth_model(24, 24, 6);
  const Problem pb = Problem::make(model, 15.0);
  const Patch gp = global_patch(pb);
  const Subdomain s(pb, gp, Axis::z, partition_layers(pb.grid, 2), 0);
  std::vector<CVector> in, serial, parallel(4);
  for (unsigned i = 0; i < 4; ++i)
  {
    in.push_back(random_vector(s.size(), i + 1));
    serial.push_back(s.solve(in.back()));
  }
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < 4; ++i)
  {
    pool.emplace_back([&, i] {
      for (int rep = 0; rep < 5; ++rep)
      {
        parallel[i] = s.solve(in[i]);
      }
    });
  }
  for (auto &t : pool)
  {
    t.join();
  }
  for (std::size_t i = 0; i < 4; ++i)
  {
    EXPECT_EQ((parallel[i] - serial[i]).norm(), 0.0);
  }
}

TEST(Layer, RebuildIsBitIdentical)
{
  const auto model = fixtures::jump_model(12, 12, 4);
  const Problem pb = Problem::make(model, 9.0, Scheme::q1);
  const Patch gp = global_patch(pb);
  const LayerPartition part = partition_layers(pb.grid, 3);
  const Subdomain a(pb, gp, Axis::z, part, 1, false), b(pb, gp, Axis::z, part, 1, false);
  EXPECT_EQ(SpMat(a.op() - b.op()).norm(), 0.0);
}

TEST(Trace, InjectThenExtract)
{
  const auto model = fixtures::constant_model(10, 12, 4);
  const Problem pb = Problem::make(model, 6.0);
  const Subdomain s(pb, global_patch(pb), Axis::z, partition_layers(pb.grid, 2), 0, false);
  const CVector p = random_vector(s.panel_size(), 4);
  CVector rhs = CVector::Zero(s.size());
  s.inject(rhs, p, 1);
  EXPECT_LT(rel_err(s.extract(rhs, 1), s.delta_scale() * p), 1e-15);
  EXPECT_EQ(s.extract(rhs, 2).norm(), 0.0);
  CVector z = CVector::Zero(s.size());
  s.inject(z, CVector::Zero(s.panel_size()), 3);
  EXPECT_EQ(z.norm(), 0.0);
}

namespace
{

// Largest pointwise difference between the layer and global Green columns
// over the layer's physical nodes, relative to the column's peak.
double green_consistency(int n, int npml, double omega)
{
  const auto model = fixtures::constant_model(n, n, npml);
  const Problem pb = Problem::make(model, omega);
  const Patch gp = global_patch(pb);
  const Subdomain s(pb, gp, Axis::z, partition_layers(pb.grid, 3), 1);
  const int p0 = n / 2, q0 = s.depth_node(s.n() / 2 + 1);
  const CVector g = s.restrict_owned(gp, solve_global(pb, delta_source(pb, gp, p0, q0)));
  const CVector l = s.solve(delta_source(pb, s.patch(), p0, q0));
  double diff = 0.0, peak = 0.0;
  for (int q = s.depth_node(1); q <= s.depth_node(s.n()); ++q)
  {
    for (int p = 1; p <= n; ++p)
    {
      const Index i = s.patch().index(p, q);
      diff = std::max(diff, std::abs(l[i] - g[i]));
      peak = std::max(peak, std::abs(g[i]));
    }
  }
  return diff / peak;
}

}  // namespace

TEST(Layer, ConsistencyFloorShrinksWithPmlWidth)
{
  const double omega = 2.0 * M_PI * 3.0;
  double prev = 1.0;
  for (int npml : {6, 10, 16, 24})
  {
    const double e = green_consistency(40, npml, omega);
    EXPECT_LT(e, prev) << "npml " << npml;
    prev = e;
  }
}

TEST(Layer, ConsistencyWithGlobalGreenFunction)
{
  // About 13 points per wavelength at the default PML width.
  const int n = 40;
  const double err = green_consistency(n, default_npml(n * n), 2.0 * M_PI * 3.0);
  RecordProperty("consistency", std::to_string(err));
  std::cout << "layer/global Green consistency " << err << "\n";
  EXPECT_LT(err, 1e-5);
}
