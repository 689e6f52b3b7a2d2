#pragma once

#include <filesystem>
#include <string_view>

#include "timgen/config.hpp"
#include "timgen/model.hpp"

namespace timgen {

inline constexpr std::string_view kCheckpointMagic = "TIMGEN1\n";

/// Layout: magic, `config <n>` followed by n config lines, `tensors <n>`
/// followed by n `name rows cols` lines, `data`, then little-endian float64
/// values of every tensor in manifest order.
void save_checkpoint(const Model& model, const Config& cfg, const std::filesystem::path& path);

struct Checkpoint {
  Config config;
  Model model;
};

/// Throws CheckpointVersionError (bad magic), CheckpointTruncatedError (short
/// file or malformed header) or CheckpointManifestError (missing tensor or
/// shape mismatch).
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace timgen
