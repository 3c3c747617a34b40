// SPDX-License-Identifier: Apache-2.0
//
// Velocity model and wavefield files.
//
// Binary form: a JSON header
//   {"nx", "nz", "npml", "h", "dtype": "f64", "order": "row-major, z-major blocks",
//    "data": "<file>"}
// next to a raw little-endian file of (nx + 2 npml) (nz + 2 npml) values.
// Wavefields use the same layout with dtype "c128" (interleaved re, im).
//
// CSV form, for tiny grids: nz lines of nx interior speeds, top row first.
// Lines starting with '#' may set "h=<value>" or "npml=<value>".

#ifndef NESTEDPT_MODEL_IO_HPP
#define NESTEDPT_MODEL_IO_HPP

#include <filesystem>
#include <memory>

#include "nestedpt/discretization.hpp"

namespace nestedpt
{

/// Loads a .json header model or a .csv model. npml_override >= 0 rebuilds
/// the PML collar with that width (nearest-node extension).
VelocityModel load_model(const std::filesystem::path &path, int npml_override = -1);

/// Writes header and data file; the data file name is the header stem + ".bin".
void save_model(const std::filesystem::path &header, const VelocityModel &m);

/// Wavefield on the extended grid in the standard (z-major) ordering.
void save_wavefield(const std::filesystem::path &header, const Grid &g, const CVector &u);
CVector load_wavefield(const std::filesystem::path &header, Grid *grid = nullptr);

}  // namespace nestedpt

#endif  // NESTEDPT_MODEL_IO_HPP
