#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stressprog/model.hpp"

namespace stressprog {

// Binary checkpoint, all integers little-endian:
//   "SPCK" | u32 version | u32 arch (0 lstm, 1 transformer) | u32 d
//   | u32 hidden | u32 heads | u32 layers | u32 context_layers | u32 ff_dim
//   | u32 flags (bit 0: positional encoding) | u32 tensor count
//   | per tensor: u32 name length, name bytes, u32 rows, u32 cols,
//     u64 byte offset into the payload
//   | f32 payload (column-major per tensor) | u32 CRC-32 of all prior bytes
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);

// Throws DataError on bad magic, version, CRC, truncation or a tensor
// directory that does not match the architecture.
ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes);
ModelParams load_checkpoint(const std::filesystem::path& path);

// Rounds every tensor through float32, i.e. what a save/load cycle yields.
ModelParams round_to_f32(const ModelParams& params);

}  // namespace stressprog
