#pragma once

// Binary checkpoint format (all integers and floats little-endian):
//
//   "RSR1"                          4-byte magic
//   u32 format_version              currently 1
//   u32 x 6                         d_model n_layers n_heads d_ff max_seq_len vocab_size
//   u32 word_count                  then per word: u32 byte_len, UTF-8 bytes, u64 frequency
//   tensors                         per tensor: u32 rows, u32 cols, rows*cols f64 row-major
//
// Tensors follow ModelWeights::tensors() order; vectors are stored as 1 x n.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rsr/model.hpp"

namespace rsr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// 64-bit FNV-1a over a byte range.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
/// FNV-1a of a file's full contents.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace rsr
