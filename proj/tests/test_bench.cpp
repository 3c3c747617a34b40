// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "nestedpt/bench.hpp"
#include "test_util.hpp"

using namespace nestedpt;

namespace
{

std::filesystem::path scratch(const std::string &name)
{
  const auto p = std::filesystem::temp_directory_path() / ("nestedpt_bench_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string without_wall_clock(const ResultTable &t)
{
  ResultTable c = t;
  for (ResultRow &r : c)
  {
    r.setup_s = r.iter_s = r.solve_s = 0.0;
  }
  std::ostringstream os;
  write_results_csv(c, os);
  return os.str();
}

}  // namespace

TEST(Synthetic, ConstantIsUniform)
{
  const Grid g = Grid::make(12, 10, 0.1, 3);
  const VelocityModel m = synthetic_model(ModelKind::constant, 1, g, 1.0);
  for (double c : m.speeds())
  {
    EXPECT_EQ(c, 1.0);
  }
  EXPECT_THROW(synthetic_model(ModelKind::constant, 1, g, 5.0), ConfigError);
}

TEST(Synthetic, DeterministicPerSeedAndInRange)
{
  const Grid g = Grid::make(40, 30, 1.0 / 41, 10);
  for (ModelKind k : {ModelKind::vertical_gradient, ModelKind::random_smooth,
                      ModelKind::layered_inclusions})
  {
    const VelocityModel a = synthetic_model(k, 7, g), b = synthetic_model(k, 7, g);
    EXPECT_EQ(a.speeds(), b.speeds()) << to_string(k);
    EXPECT_NE(a.speeds(), synthetic_model(k, 8, g).speeds()) << to_string(k);
    EXPECT_GE(a.min_speed(), 1.0);
    EXPECT_LE(a.max_speed(), 4.5);
    EXPECT_FALSE(a.has_exact_sampler());
    EXPECT_EQ(parse_model_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_model_kind("marmousi"), ConfigError);
}

TEST(Synthetic, RandomSmoothCorrelationLength)
{
  const Grid g = Grid::make(96, 96, 1.0 / 97, 10);
  for (std::uint64_t seed : {1u, 2u, 3u})
  {
    const VelocityModel m = synthetic_model(ModelKind::random_smooth, seed, g);
    EXPECT_GE(correlation_length(m), 4.0) << "seed " << seed;
  }
}

TEST(Synthetic, LayeredInclusionsHaveSharpContrasts)
{
  const Grid g = Grid::make(60, 60, 1.0 / 61, 10);
  const VelocityModel m = synthetic_model(ModelKind::layered_inclusions, 4, g);
  Problem pb = Problem::make(std::make_shared<VelocityModel>(m), 10.0, Scheme::q1);
  int flagged = 0, big_jumps = 0;
  for (int q = 1; q < g.nz; ++q)
  {
    for (int p = 1; p < g.nx; ++p)
    {
      flagged += q1_element_discontinuous(pb, p, q) ? 1 : 0;
      const double r = m.speed(p, q + 1) / m.speed(p, q);
      big_jumps += (r > 1.3 || r < 1 / 1.3) ? 1 : 0;
    }
  }
  EXPECT_GT(flagged, 0);
  EXPECT_GE(big_jumps, 2);
}

TEST(Config, ParsesAndRejects)
{
  const auto j = nlohmann::json::parse(R"({
    "model": {"synthetic": "random-smooth", "seed": 5},
    "sizes": [[20, 20], [40, 40]],
    "frequencies": [2.0],
    "frequency_scaling": "sqrt_n",
    "partitions": [[2, 2], [3]],
    "npml": "auto",
    "backends": ["direct", "nested-lu"],
    "preconditioners": ["gs", "jac"],
    "methods": ["gmres", "bicgstab"],
    "plr": {"eps": 1e-8, "threshold": 64},
    "seed": 9
  })");
  const ExperimentConfig c = parse_config(j);
  EXPECT_EQ(c.model.kind, ModelKind::random_smooth);
  EXPECT_EQ(c.sizes.size(), 2u);
  EXPECT_EQ(c.scaling, FrequencyScaling::sqrt);
  EXPECT_EQ(c.partitions[1].layers, 3);
  EXPECT_EQ(c.partitions[1].cells, 0);
  EXPECT_EQ(c.npml, -1);
  EXPECT_TRUE(c.plr.enabled);
  EXPECT_EQ(c.plr.threshold, 64);
  EXPECT_EQ(c.backends[1], Backend::nested_lu);
  EXPECT_EQ(c.methods[1], KrylovMethod::bicgstab);

  auto bad = j;
  bad["backends"] = {"magic"};
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = j;
  bad["frequency_scaling"] = "cubic";
  EXPECT_THROW(parse_config(bad), ConfigError);
  bad = j;
  bad.erase("model");
  EXPECT_THROW(parse_config(bad), ConfigError);
}

TEST(Sweep, EmptyFrequencyListGivesEmptyTable)
{
  ExperimentConfig c;
  c.sizes = {{20, 20}};
  EXPECT_TRUE(run_sweep(c).empty());
}

TEST(Sweep, ConstantMediumConvergesQuicklyAndMatchesOracle)
{
  ExperimentConfig c;
  c.model.kind = ModelKind::constant;
  c.model.value = 1.0;
  c.sizes = {{32, 32}};
  c.frequencies = {3.0};
  c.partitions = {{2, 0}, {4, 0}};
  c.preconditioners = {Preconditioner::gs, Preconditioner::jacobi};
  c.timing = false;
  const ResultTable t = run_sweep(c);
  ASSERT_EQ(t.size(), 4u);
  for (const ResultRow &r : t)
  {
    EXPECT_EQ(r.status, "ok") << r.run_id;
    ASSERT_TRUE(r.error_vs_direct.has_value());
    EXPECT_LE(*r.error_vs_direct, 10 * c.ktol) << r.run_id;
    if (r.precond == "gs")
    {
      EXPECT_LE(r.iterations, 4.0) << r.run_id;
    }
    EXPECT_GT(r.touches_per_iter, 0u);
  }
}

TEST(Sweep, FailuresAreRecordedAndTheSweepContinues)
{
  ExperimentConfig c;
  c.sizes = {{12, 12}};
  c.frequencies = {1.0};
  c.partitions = {{20, 0}, {2, 0}};  // 20 layers do not fit 12 rows
  c.timing = false;
  const ResultTable t = run_sweep(c);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].status.rfind("error", 0), 0u);
  EXPECT_EQ(t[1].status, "ok");
}

TEST(Sweep, OutputIsReproducibleAndReadable)
{
  ExperimentConfig c;
  c.model.kind = ModelKind::layered_inclusions;
  c.model.seed = 3;
  c.sizes = {{24, 24}};
  c.frequencies = {2.0};
  c.methods = {KrylovMethod::gmres, KrylovMethod::bicgstab};
  c.timing = false;
  const ResultTable a = run_sweep(c), b = run_sweep(c);
  EXPECT_EQ(without_wall_clock(a), without_wall_clock(b));

  std::stringstream ss;
  write_results_csv(a, ss);
  const ResultTable back = read_results_csv(ss);
  ASSERT_EQ(back.size(), a.size());
  EXPECT_EQ(back[1].method, "bicgstab");
  EXPECT_EQ(back[0].iterations, a[0].iterations);
  EXPECT_EQ(back[0].touches_per_iter, a[0].touches_per_iter);

  const auto dir = scratch("out");
  c.output = dir.string();
  write_outputs(c, a);
  EXPECT_TRUE(std::filesystem::exists(dir / "results.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "metadata.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "residuals" / (a[0].run_id + ".csv")));
  std::filesystem::remove_all(dir);
}

TEST(Spectrum, IdentityHasAllEigenvaluesAtOne)
{
  const auto e = eigenvalues(CMatrix::Identity(12, 12));
  for (cplx l : e)
  {
    EXPECT_EQ(l, cplx(1.0, 0.0));
  }
  EXPECT_EQ(clustering_metric(e), 1.0);
  EXPECT_EQ(clustering_metric({cplx(1.6, 0), cplx(1.2, 0.1)}), 0.5);
}

TEST(Spectrum, InvariantUnderPanelPermutation)
{
  const CMatrix A = CMatrix::Random(8, 8);
  Eigen::PermutationMatrix<Eigen::Dynamic> P(8);
  P.indices() << 0, 1, 4, 5, 2, 3, 6, 7;
  const auto a = eigenvalues(A), b = eigenvalues(P * A * P.transpose());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    EXPECT_NEAR(std::abs(a[i] - b[i]), 0.0, 1e-10);
  }
}

TEST(Spectrum, GaussSeidelClustersBetterThanJacobi)
{
  const Grid g = Grid::make(50, 50, 1.0 / 51, 10);
  const auto m = std::make_shared<VelocityModel>(synthetic_model(ModelKind::layered_inclusions, 1, g));
  const Problem pb = Problem::make(m, 2 * std::numbers::pi * 10.0);
  const SpectrumResult r = dump_spectrum(pb, 5, "small");
  EXPECT_EQ(r.dimension, Index(2 * 2 * 4 * 70));
  EXPECT_GT(r.gs_metric, r.jac_metric);
}

TEST(Spectrum, DimensionCap)
{
  const Problem pb = Problem::make(fixtures::constant_model(300, 40, 10), 10.0);
  EXPECT_THROW(dump_spectrum(pb, 6, "big"), ConfigError);
}

TEST(Fit, RecoversExactSlope)
{
  std::vector<double> x, y;
  for (double n : {1e3, 4e3, 1.6e4, 6.4e4})
  {
    x.push_back(n);
    y.push_back(3.0 * std::pow(n, 0.75));
  }
  const ScalingFit f = fit_loglog(x, y);
  EXPECT_NEAR(f.slope, 0.75, 1e-12);
  EXPECT_NEAR(f.ci_low, 0.75, 0.01);
  EXPECT_NEAR(f.ci_high, 0.75, 0.01);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-9);
}

TEST(Fit, ConfidenceIntervalCoversNoisySlope)
{
  std::vector<double> x, y;
  const double noise[] = {1.02, 0.97, 1.01, 0.99, 1.03};
  int i = 0;
  for (double n : {1e3, 2e3, 4e3, 8e3, 1.6e4})
  {
    x.push_back(n);
    y.push_back(std::pow(n, 0.6) * noise[i++]);
  }
  const ScalingFit f = fit_loglog(x, y);
  EXPECT_LT(f.ci_low, 0.6);
  EXPECT_GT(f.ci_high, 0.6);
}

TEST(Fit, NeedsFourSizesPerBackend)
{
  ResultTable t;
  for (int k = 0; k < 3; ++k)
  {
    ResultRow r;
    r.backend = "nested-lu";
    r.N = 1000;
    r.touches_per_iter = 100;
    t.push_back(r);
  }
  EXPECT_THROW(fit_scaling(t), ConfigError);
  EXPECT_THROW(fit_loglog({1, 1, 1}, {1, 2, 3}), ConfigError);

  ResultTable ok;
  for (std::int64_t n : {1000, 2000, 4000, 8000})
  {
    for (const char *b : {"nested-lu", "nested-pt"})
    {
      ResultRow r;
      r.backend = b;
      r.N = n;
      r.touches_per_iter = std::uint64_t((b[7] == 'l' ? 10.0 : 40.0) * std::pow(double(n), 0.7));
      ok.push_back(r);
    }
  }
  const auto fits = fit_scaling(ok);
  ASSERT_EQ(fits.size(), 2u);
  EXPECT_NEAR(fits[0].slope, 0.7, 1e-3);
  EXPECT_TRUE(intervals_overlap(fits[0], fits[1]));
  EXPECT_LT(fits[0].level, fits[1].level);  // nested-lu sorts first
}
