#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "bitloupe/model.hpp"

namespace bitloupe {

// Binary checkpoint container, little-endian throughout:
//
//   magic "BLCP" | u32 version (1)
//   u32 n_blocks, d_model, n_heads, d_ff, vocab_size, max_seq_len | u64 seed
//   f32 alpha[n_blocks]
//   u32 n_tensors, then per tensor in canonical (name-sorted) order:
//     u32 name_len | name bytes
//     u8 dtype (0 = float32, 1 = int8)
//     u32 ndim | u64 extents[ndim]
//     f32 quant_scale (1.0 for float32)
//     raw element bytes, little-endian, row-major
//
// Digests below cover the tensor records only; the config/alpha header is
// excluded on purpose so inference-time residual-scaling adjustments keep
// the stored parameter identity intact.
void save_checkpoint(const ModelState& m, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

// SHA-256 over (name, per-tensor digest) pairs in canonical order.
std::array<std::uint8_t, 32> checkpoint_digest(const ModelState& m);
std::string checkpoint_digest_hex(const ModelState& m);

// SHA-256 of a file's bytes (used when reports reference artifacts on disk).
std::string file_digest_hex(const std::filesystem::path& path);

}  // namespace bitloupe
