// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "nestedpt/model_io.hpp"
#include "test_util.hpp"

using namespace nestedpt;

namespace
{

std::filesystem::path scratch(const std::string &name)
{
  const auto p = std::filesystem::temp_directory_path() / ("nestedpt_io_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(ModelIO, BinaryRoundTripIsExact)
{
  const auto dir = scratch("bin");
  const auto m = fixtures::smooth_model(7, 5, 3);
  save_model(dir / "m.json", *m);
  ASSERT_TRUE(std::filesystem::exists(dir / "m.bin"));
  EXPECT_EQ(std::filesystem::file_size(dir / "m.bin"), 13u * 11u * sizeof(double));
  const VelocityModel back = load_model(dir / "m.json");
  EXPECT_EQ(back.grid().nx, 7);
  EXPECT_EQ(back.grid().nz, 5);
  EXPECT_EQ(back.grid().npml, 3);
  EXPECT_EQ(back.grid().h, m->grid().h);
  EXPECT_EQ(back.speeds(), m->speeds());
  std::filesystem::remove_all(dir);
}

TEST(ModelIO, NpmlOverrideExtendsByNearestNode)
{
  const auto dir = scratch("npml");
  const auto m = fixtures::smooth_model(6, 6, 2);
  save_model(dir / "m.json", *m);
  const VelocityModel wide = load_model(dir / "m.json", 5);
  EXPECT_EQ(wide.grid().npml, 5);
  EXPECT_EQ(wide.speed(3, 4), m->speed(3, 4));
  EXPECT_EQ(wide.speed(-4, 1), m->speed(-1, 1));
  std::filesystem::remove_all(dir);
}

TEST(ModelIO, CsvForTinyGrids)
{
  const auto dir = scratch("csv");
  {
    std::ofstream os(dir / "tiny.csv");
    os << "# h=0.25 npml=2\n1,2,3\n1.5,2.5,3.5\n";
  }
  const VelocityModel m = load_model(dir / "tiny.csv");
  EXPECT_EQ(m.grid().nx, 3);
  EXPECT_EQ(m.grid().nz, 2);
  EXPECT_EQ(m.grid().npml, 2);
  EXPECT_DOUBLE_EQ(m.grid().h, 0.25);
  EXPECT_EQ(m.speed(1, 1), 1.0);
  EXPECT_EQ(m.speed(3, 2), 3.5);
  EXPECT_EQ(m.speed(5, 4), 3.5);  // PML copies the nearest node

  {
    std::ofstream os(dir / "ragged.csv");
    os << "1,2\n1\n";
  }
  EXPECT_THROW(load_model(dir / "ragged.csv"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(ModelIO, HeaderErrors)
{
  const auto dir = scratch("err");
  EXPECT_THROW(load_model(dir / "missing.json"), ConfigError);
  {
    std::ofstream os(dir / "short.json");
    os << R"({"nx": 4, "nz": 4, "npml": 1, "h": 0.1, "dtype": "f64"})";
    std::ofstream(dir / "short.bin") << "abc";
  }
  EXPECT_THROW(load_model(dir / "short.json"), ConfigError);
  {
    std::ofstream os(dir / "f32.json");
    os << R"({"nx": 4, "nz": 4, "npml": 1, "h": 0.1, "dtype": "f32"})";
  }
  EXPECT_THROW(load_model(dir / "f32.json"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(ModelIO, WavefieldRoundTrip)
{
  const auto dir = scratch("wave");
  const Grid g = Grid::make(4, 3, 0.2, 1);
  const CVector u = fixtures::random_vector(g.extended_size(), 3);
  save_wavefield(dir / "u.json", g, u);
  Grid back;
  EXPECT_EQ(load_wavefield(dir / "u.json", &back), u);
  EXPECT_EQ(back.nx, 4);
  EXPECT_THROW(save_wavefield(dir / "v.json", g, CVector(CVector::Zero(3))), ConfigError);
  std::filesystem::remove_all(dir);
}
