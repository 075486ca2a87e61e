#pragma once

#include <cstdint>
#include <filesystem>

#include "cabkgc/model.hpp"

namespace cabkgc {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct CheckpointData {
  ModelConfig config;
  Parameters params;
  std::uint64_t dataset_fingerprint = 0;
  std::uint32_t token_layout_version = 0;
};

// Binary checkpoint layout (all integers little-endian):
//   "CABK" magic, u32 format version,
//   key-value header (u64 pair count, then len-prefixed key and value strings
//   in sorted key order) carrying the model config, the dataset fingerprint
//   (Vocabulary::fingerprint) and the token-id layout version,
//   u64 tensor count, then each tensor from named_tensors order as
//   u64 name length + name + u64 rank (2) + u64 dims + row-major f64 data,
//   terminated by an FNV-1a 64 checksum over every preceding byte.
void save_checkpoint(const Parameters& params, const ModelConfig& cfg,
                     std::uint64_t dataset_fingerprint,
                     const std::filesystem::path& path);

// Throws IoError (unreadable), ChecksumMismatch (truncated or corrupted
// payload), FormatVersionMismatch (bad magic/version/structure).
CheckpointData load_checkpoint(const std::filesystem::path& path);

// Same, then throws VocabularyMismatch unless the stored dataset fingerprint
// equals `expected_fingerprint` and the token layout version matches.
CheckpointData load_checkpoint(const std::filesystem::path& path,
                               std::uint64_t expected_fingerprint);

}  // namespace cabkgc
