#ifndef HEBBNET_CHECKPOINT_HPP
#define HEBBNET_CHECKPOINT_HPP

#include <cstdint>
#include <string>

#include "hebbnet/network.hpp"

namespace hebbnet {

// Checkpoint layout: a directory with manifest.json plus per-layer
// layer<i>.weights (little-endian float32, row-major K x D) and
// layer<i>.bn (running mean then running var, little-endian float32).
// Each blob's CRC32 is recorded in the manifest and verified on load.

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::string& dir);
Model load_checkpoint(const std::string& dir);

std::uint32_t crc32(const void* data, std::size_t len);

}  // namespace hebbnet

#endif
