// SPDX-License-Identifier: Apache-2.0

#include "nestedpt/artifacts.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace nestedpt
{

namespace
{

class Fnv1a
{
public:
  template <class T>
  void add(const T &v)
  {
    bytes(&v, sizeof(T));
  }
  void bytes(const void *p, std::size_t n)
  {
    const auto *b = static_cast<const unsigned char *>(p);
    for (std::size_t i = 0; i < n; ++i)
    {
      h_ ^= b[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const { return h_; }

private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

constexpr char kMagic[8] = {'N', 'P', 'T', 'G', 'R', 'N', '0', '1'};

template <class T>
void put(std::ostream &os, T v)
{
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <class T>
T get(std::istream &is)
{
  T v{};
  is.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!is)
  {
    throw NumericalError("truncated Green block blob");
  }
  return v;
}

nlohmann::json read_manifest(const std::filesystem::path &p)
{
  std::ifstream in(p);
  if (!in)
  {
    return {{"version", kArtifactVersion}, {"entries", nlohmann::json::array()}};
  }
  return nlohmann::json::parse(in);
}

}  // namespace

std::uint64_t artifact_key(const Problem &pb, const LayerPartition &part, const PlrOptions &plr)
{
  Fnv1a h;
  h.add(std::int32_t(kArtifactVersion));
  const auto &c = pb.model->speeds();
  h.bytes(c.data(), c.size() * sizeof(double));
  h.add(std::int32_t(pb.grid.nx));
  h.add(std::int32_t(pb.grid.nz));
  h.add(std::int32_t(pb.grid.npml));
  h.add(pb.grid.h);
  h.add(pb.omega);
  h.add(pb.pml_C);
  h.add(std::int32_t(pb.scheme));
  for (int e : part.extents)
  {
    h.add(std::int32_t(e));
  }
  h.add(std::uint8_t(plr.enabled));
  if (plr.enabled)
  {
    h.add(plr.eps);
    h.add(std::int32_t(plr.max_rank));
    h.add(std::int64_t(plr.threshold));
    h.add(std::int64_t(plr.min_leaf));
  }
  return h.value();
}

std::string key_hex(std::uint64_t key)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(key));
  return buf;
}

void write_green_blocks(std::ostream &os, const std::vector<GreenBlockSet> &sets)
{
  os.write(kMagic, 8);
  put<std::int64_t>(os, std::int64_t(sets.size()));
  for (const GreenBlockSet &b : sets)
  {
    put<std::int32_t>(os, b.n);
    put<std::int64_t>(os, b.panel);
    put<std::uint8_t>(os, b.has_top);
    put<std::uint8_t>(os, b.has_bottom);
    for (const auto &row : b.down)
    {
      for (const BlockOp &op : row)
      {
        op.write(os);
      }
    }
    for (const auto &row : b.up)
    {
      for (const BlockOp &op : row)
      {
        op.write(os);
      }
    }
  }
}

std::vector<GreenBlockSet> read_green_blocks(std::istream &is)
{
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
  {
    throw NumericalError("not a Green block blob");
  }
  std::vector<GreenBlockSet> sets(std::size_t(get<std::int64_t>(is)));
  for (GreenBlockSet &b : sets)
  {
    b.n = get<std::int32_t>(is);
    b.panel = get<std::int64_t>(is);
    b.has_top = get<std::uint8_t>(is) != 0;
    b.has_bottom = get<std::uint8_t>(is) != 0;
    for (auto &row : b.down)
    {
      for (BlockOp &op : row)
      {
        op = BlockOp::read(is);
      }
    }
    for (auto &row : b.up)
    {
      for (BlockOp &op : row)
      {
        op = BlockOp::read(is);
      }
    }
  }
  return sets;
}

ArtifactStore::ArtifactStore(std::filesystem::path dir) : dir_(std::move(dir))
{
  std::filesystem::create_directories(dir_);
}

std::optional<std::vector<GreenBlockSet>> ArtifactStore::load_green(std::uint64_t key) const
{
  const nlohmann::json m = read_manifest(manifest_path());
  if (m.value("version", 0) != kArtifactVersion)
  {
    return std::nullopt;
  }
  const std::string hex = key_hex(key);
  for (const auto &e : m["entries"])
  {
    if (e.value("key", "") == hex && e.value("kind", "") == "green_blocks")
    {
      std::ifstream in(dir_ / e.value("file", ""), std::ios::binary);
      if (!in)
      {
        return std::nullopt;
      }
      return read_green_blocks(in);
    }
  }
  return std::nullopt;
}

void ArtifactStore::save_green(std::uint64_t key, const std::vector<GreenBlockSet> &sets,
                               double omega, const std::string &note) const
{
  const std::string hex = key_hex(key);
  const std::string file = "green_" + hex + ".bin";
  {
    std::ofstream out(dir_ / file, std::ios::binary);
    write_green_blocks(out, sets);
    if (!out)
    {
      throw std::runtime_error("cannot write artifact " + (dir_ / file).string());
    }
  }
  nlohmann::json m = read_manifest(manifest_path());
  m["version"] = kArtifactVersion;
  auto &entries = m["entries"];
  nlohmann::json keep = nlohmann::json::array();
  for (const auto &e : entries)
  {
    if (e.value("key", "") != hex)
    {
      keep.push_back(e);
    }
  }
  keep.push_back({{"key", hex},
                  {"kind", "green_blocks"},
                  {"file", file},
                  {"layers", sets.size()},
                  {"panel", sets.empty() ? 0 : sets.front().panel},
                  {"omega", omega},
                  {"note", note}});
  entries = keep;
  std::ofstream out(manifest_path());
  out << m.dump(2) << '\n';
}

}  // namespace nestedpt
