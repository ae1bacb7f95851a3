#pragma once

#include <cstdint>
#include <filesystem>

#include "dasad/networks.hpp"

namespace dasad {

/// Writes `<stem>.bin` (raw little-endian f64 arrays, column-major, concatenated)
/// and `<stem>.json` (architecture, names, shapes, byte offsets, dtype, creation seed).
void save_checkpoint(const Model& model, const std::filesystem::path& stem, std::uint64_t creation_seed);

struct LoadedCheckpoint {
  Model model;
  std::uint64_t creation_seed = 0;
};

/// Throws std::runtime_error naming the file on any format or shape mismatch.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& stem);

}  // namespace dasad
