#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "mhmarl/tensor.hpp"

namespace mhmarl {

// Checkpoint file, version 1. All integers little-endian.
//
//   bytes 0..7   magic "MHCKPT\0\1"
//   u64          tensor count
//   per tensor:  u64 name length, name bytes (UTF-8),
//                u64 rank, rank x u64 dims,
//                product(dims) x IEEE-754 binary64 values
//
// Values are copied bit for bit, so load(save(x)) == x exactly.
inline constexpr char kCheckpointMagic[8] = {'M', 'H', 'C', 'K', 'P', 'T', '\0', '\1'};

// Written to a sibling temp file first, then renamed over `path`.
void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter> tensors);
std::vector<Parameter> load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into `params` by name. Throws std::runtime_error
// when a name is missing or a shape differs.
void assign_parameters(std::span<Parameter* const> params, std::span<const Parameter> saved);

}  // namespace mhmarl
