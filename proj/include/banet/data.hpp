// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "banet/tensor.hpp"

namespace banet {

/// Images stored N×C×H×W as normalized floats regardless of training precision.
struct Dataset {
  std::string split;
  std::int64_t channels = 3;
  std::int64_t height = 32;
  std::int64_t width = 32;
  int num_classes = 10;
  std::vector<float> images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::int64_t image_size() const { return channels * height * width; }
  std::span<const float> image(std::size_t i) const {
    return std::span<const float>(images).subspan(i * image_size(), image_size());
  }
  /// First `n` samples (all of them if n exceeds the size).
  Dataset head(std::size_t n) const;
  /// Samples whose label is in `classes`, original order kept.
  Dataset filter(const std::vector<int>& classes) const;
  void validate() const;
};

/// Fixed per-channel statistics used to normalize CIFAR-10 pixels after scaling to [0, 1].
struct CifarNormalization {
  std::array<float, 3> mean{0.4914f, 0.4822f, 0.4465f};
  std::array<float, 3> stddev{0.2470f, 0.2435f, 0.2616f};
};

inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;
inline constexpr std::size_t kCifarRecordsPerFile = 10000;

/// One binary batch file: 10000 records of a label byte and 3072 pixel bytes (R, G, B planes).
Dataset load_cifar10_file(const std::filesystem::path& path, const std::string& split,
                          const CifarNormalization& norm = {});

/// data_batch_1..5.bin (whichever exist, at least one) and test_batch.bin.
std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir, const CifarNormalization& norm = {});

/// Raw bytes of `records` class-conditioned synthetic images in the CIFAR-10 batch layout.
///
/// Class identity is carried by colour and stripe frequency, both of which
/// survive cropping and flipping; orientation, phase and noise vary per image.
std::string synthetic_cifar_records(std::size_t records, std::uint64_t seed);

/// Writes data_batch_1.bin and test_batch.bin of synthetic records into `dir`.
void write_synthetic_cifar(const std::filesystem::path& dir, std::uint64_t seed);

struct AugmentParams {
  int offset_y = 4;
  int offset_x = 4;
  bool flip = false;
};

inline constexpr int kAugmentPad = 4;

AugmentParams draw_augment(std::mt19937_64& rng);

/// Zero-pads by 4, crops an H×W window at the given offsets, then optionally mirrors columns.
std::vector<float> apply_augment(std::span<const float> image, std::int64_t channels, std::int64_t height,
                                 std::int64_t width, const AugmentParams& params);

std::vector<float> augment(std::span<const float> image, std::int64_t channels, std::int64_t height,
                           std::int64_t width, std::mt19937_64& rng);

/// Gathers samples into a B×C×H×W tensor.
template <typename T>
Tensor<T> make_batch(const Dataset& data, std::span<const std::size_t> indices,
                     const std::vector<AugmentParams>* augmentation = nullptr);

}  // namespace banet
