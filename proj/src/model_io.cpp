// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/model_io.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace nestedpt
{

namespace fs = std::filesystem;

namespace
{

constexpr const char *kOrder = "row-major, z-major blocks";

nlohmann::json read_header(const fs::path &p)
{
  std::ifstream in(p);
  if (!in)
  {
    throw ConfigError("cannot open " + p.string());
  }
  try
  {
    return nlohmann::json::parse(in);
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ConfigError("bad header " + p.string() + ": " + e.what());
  }
}

Grid header_grid(const nlohmann::json &j)
{
  try
  {
    return Grid::make(j.at("nx").get<int>(), j.at("nz").get<int>(), j.at("h").get<double>(),
                      j.at("npml").get<int>());
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ConfigError(std::string("incomplete grid header: ") + e.what());
  }
}

fs::path data_path(const fs::path &header, const nlohmann::json &j)
{
  const fs::path dir = header.parent_path();
  if (j.contains("data"))
  {
    return dir / j["data"].get<std::string>();
  }
  return dir / (header.stem().string() + ".bin");
}

template <class T>
std::vector<T> read_raw(const fs::path &p, std::size_t count)
{
  std::ifstream in(p, std::ios::binary);
  if (!in)
  {
    throw ConfigError("cannot open data file " + p.string());
  }
  std::vector<T> v(count);
  in.read(reinterpret_cast<char *>(v.data()), std::streamsize(count * sizeof(T)));
  if (!in)
  {
    throw ConfigError("data file " + p.string() + " is shorter than the header declares");
  }
  return v;
}

void write_header(const fs::path &header, const Grid &g, const char *dtype)
{
  const nlohmann::json j = {{"nx", g.nx},       {"nz", g.nz},    {"npml", g.npml},
                            {"h", g.h},         {"dtype", dtype}, {"order", kOrder},
                            {"data", header.stem().string() + ".bin"}};
  std::ofstream out(header);
  out << j.dump(2) << '\n';
  if (!out)
  {
    throw std::runtime_error("cannot write " + header.string());
  }
}

VelocityModel load_csv(const fs::path &p)
{
  std::ifstream in(p);
  if (!in)
  {
    throw ConfigError("cannot open " + p.string());
  }
  std::vector<std::vector<double>> rows;
  double h = 0.0;
  int npml = -1;
  std::string line;
  while (std::getline(in, line))
  {
    if (line.empty())
    {
      continue;
    }
    if (line[0] == '#')
    {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok)
      {
        if (tok.rfind("h=", 0) == 0)
        {
          h = std::stod(tok.substr(2));
        }
        else if (tok.rfind("npml=", 0) == 0)
        {
          npml = std::stoi(tok.substr(5));
        }
      }
      continue;
    }
    std::vector<double> r;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
    {
      try
      {
        r.push_back(std::stod(cell));
      }
      catch (const std::exception &)
      {
        throw ConfigError("non-numeric CSV entry '" + cell + "' in " + p.string());
      }
    }
    if (!rows.empty() && r.size() != rows.front().size())
    {
      throw ConfigError("ragged CSV model " + p.string());
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty())
  {
    throw ConfigError("empty CSV model " + p.string());
  }
  const int nz = int(rows.size()), nx = int(rows.front().size());
  if (h <= 0.0)
  {
    h = 1.0 / (nx + 1);
  }
  std::vector<double> c;
  for (const auto &r : rows)
  {
    c.insert(c.end(), r.begin(), r.end());
  }
  const VelocityModel inner(Grid::make(nx, nz, h, 0), std::move(c));
  return inner.with_npml(npml >= 0 ? npml : default_npml(std::int64_t(nx) * nz));
}

}  // namespace

VelocityModel load_model(const fs::path &path, int npml_override)
{
  VelocityModel m = [&] {
    if (path.extension() == ".csv")
    {
      return load_csv(path);
    }
    const nlohmann::json j = read_header(path);
    if (j.value("dtype", "f64") != "f64")
    {
      throw ConfigError("model dtype must be f64");
    }
    const Grid g = header_grid(j);
    return VelocityModel(g, read_raw<double>(data_path(path, j), std::size_t(g.extended_size())));
  }();
  if (npml_override >= 0 && npml_override != m.grid().npml)
  {
    return m.with_npml(npml_override);
  }
  return m;
}

void save_model(const fs::path &header, const VelocityModel &m)
{
  write_header(header, m.grid(), "f64");
  std::ofstream out(header.parent_path() / (header.stem().string() + ".bin"), std::ios::binary);
  const auto &c = m.speeds();
  out.write(reinterpret_cast<const char *>(c.data()), std::streamsize(c.size() * sizeof(double)));
}

void save_wavefield(const fs::path &header, const Grid &g, const CVector &u)
{
  if (u.size() != g.extended_size())
  {
    throw ConfigError("wavefield size does not match the grid");
  }
  write_header(header, g, "c128");
  std::ofstream out(header.parent_path() / (header.stem().string() + ".bin"), std::ios::binary);
  out.write(reinterpret_cast<const char *>(u.data()), std::streamsize(u.size() * sizeof(cplx)));
}

CVector load_wavefield(const fs::path &header, Grid *grid)
{
  const nlohmann::json j = read_header(header);
  if (j.value("dtype", "") != "c128")
  {
    throw ConfigError("wavefield dtype must be c128");
  }
  const Grid g = header_grid(j);
  const auto v = read_raw<cplx>(data_path(header, j), std::size_t(g.extended_size()));
  if (grid)
  {
    *grid = g;
  }
  return Eigen::Map<const CVector>(v.data(), Index(v.size()));
}

}  // namespace nestedpt
