// SPDX-License-Identifier: Apache-2.0
//
// Offline artifacts: interface Green blocks stored as versioned binary blobs
// in a directory, indexed by manifest.json and keyed by a hash of everything
// that determines them.

#ifndef NESTEDPT_ARTIFACTS_HPP
#define NESTEDPT_ARTIFACTS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nestedpt/green_ops.hpp"

namespace nestedpt
{

inline constexpr int kArtifactVersion = 1;

/// FNV-1a over model speeds, grid, omega, PML strength, scheme, partition
/// and compression settings.
std::uint64_t artifact_key(const Problem &pb, const LayerPartition &part, const PlrOptions &plr);
std::string key_hex(std::uint64_t key);

void write_green_blocks(std::ostream &os, const std::vector<GreenBlockSet> &sets);
std::vector<GreenBlockSet> read_green_blocks(std::istream &is);

class ArtifactStore
{
public:
  explicit ArtifactStore(std::filesystem::path dir);

  const std::filesystem::path &dir() const { return dir_; }
  std::filesystem::path manifest_path() const { return dir_ / "manifest.json"; }

  /// Loads cached blocks; nullopt when the key is absent or the version differs.
  std::optional<std::vector<GreenBlockSet>> load_green(std::uint64_t key) const;
  /// Writes the blob and adds or replaces its manifest entry.
  void save_green(std::uint64_t key, const std::vector<GreenBlockSet> &sets, double omega,
                  const std::string &note = {}) const;

private:
  std::filesystem::path dir_;
};

}  // namespace nestedpt

#endif  // NESTEDPT_ARTIFACTS_HPP
