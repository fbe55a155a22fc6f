// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint layout, all integers little-endian:
//
//   "BANET1"
//   repeated, in registry order:
//     u32 name length, name bytes (UTF-8)
//     u32 rank, rank × u32 extents
//     numel × f32 values
//
// Batch-norm running statistics are registered and stored like parameters.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "banet/backbone.hpp"

namespace banet {

inline constexpr char kCheckpointMagic[] = "BANET1";

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

std::string encode_checkpoint(const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> decode_checkpoint(const std::string& bytes);

template <typename T>
void save_checkpoint(const Network<T>& net, const std::filesystem::path& path);

/// Replaces every registered value. Throws ConfigurationError naming the first
/// parameter whose name or shape disagrees, leaving the network untouched.
template <typename T>
void load_checkpoint(Network<T>& net, const std::filesystem::path& path);

}  // namespace banet
