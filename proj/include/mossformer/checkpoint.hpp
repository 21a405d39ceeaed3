// Copyright 2026 The mossformer-cpp Authors
// SPDX-License-Identifier: Apache-2.0

// Single-file checkpoints. Layout (all integers little-endian):
//
//   magic        8 bytes  "MSFMCKPT"
//   version      u32      kCheckpointVersion
//   scalar size  u32      4 (float) or 8 (double)
//   config       u64 length + key=value text (ModelConfig::to_text)
//   epoch        u64
//   adam steps   u64
//   rng state    u64 length + text of the std::mt19937_64 state
//   3 tables     parameters, Adam first moments, Adam second moments; each is
//                u64 count, then per entry: u32 name length, name, u8 trainable,
//                u32 rank, u64 dims[rank], raw scalars
//
// Files are written to a temporary name and renamed into place.

#pragma once

#include <cstdint>
#include <string>

#include "mossformer/config.hpp"
#include "mossformer/autodiff.hpp"

namespace mossformer {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  ModelConfig config;
  ParamStore<T> params;
  ParamStore<T> adam_m, adam_v;  // empty when no optimizer state was saved
  std::uint64_t adam_steps = 0;
  std::uint64_t epoch = 0;
  std::string rng_state;
};

template <typename T>
void save_checkpoint(const std::string& path, const Checkpoint<T>& ckpt);

/// Throws FormatError for a file that is not a checkpoint and VersionError
/// for an unknown version, a different scalar type, or parameters that do
/// not match the architecture described by the stored config.
template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

/// Scalar size recorded in a checkpoint header (4 or 8).
std::uint32_t checkpoint_scalar_size(const std::string& path);

}  // namespace mossformer
