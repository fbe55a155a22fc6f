// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "banet/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "banet/io.hpp"

namespace banet {

Dataset Dataset::head(std::size_t n) const {
  Dataset out = *this;
  n = std::min(n, size());
  out.labels.resize(n);
  out.images.resize(n * static_cast<std::size_t>(image_size()));
  return out;
}

Dataset Dataset::filter(const std::vector<int>& classes) const {
  Dataset out = *this;
  out.labels.clear();
  out.images.clear();
  for (std::size_t i = 0; i < size(); ++i) {
    if (std::find(classes.begin(), classes.end(), labels[i]) == classes.end()) continue;
    out.labels.push_back(labels[i]);
    const auto img = image(i);
    out.images.insert(out.images.end(), img.begin(), img.end());
  }
  return out;
}

void Dataset::validate() const {
  if (images.size() != labels.size() * static_cast<std::size_t>(image_size())) {
    throw FormatError("dataset '" + split + "': " + std::to_string(images.size()) + " pixel values for " +
                      std::to_string(labels.size()) + " labels");
  }
  for (const int l : labels) {
    if (l < 0 || l >= num_classes) throw FormatError("dataset '" + split + "': label " + std::to_string(l) +
                                                     " outside [0, " + std::to_string(num_classes) + ")");
  }
}

Dataset load_cifar10_file(const std::filesystem::path& path, const std::string& split,
                          const CifarNormalization& norm) {
  const std::string bytes = read_file(path);
  const std::size_t expected = kCifarRecordBytes * kCifarRecordsPerFile;
  if (bytes.size() != expected) {
    throw FormatError(path.string() + ": expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  Dataset d;
  d.split = split;
  d.labels.resize(kCifarRecordsPerFile);
  d.images.resize(kCifarRecordsPerFile * static_cast<std::size_t>(d.image_size()));
  const std::size_t plane = 32 * 32;
  for (std::size_t r = 0; r < kCifarRecordsPerFile; ++r) {
    const auto* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + r * kCifarRecordBytes;
    d.labels[r] = rec[0];
    float* dst = d.images.data() + r * 3 * plane;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        const float v = static_cast<float>(rec[1 + c * plane + p]) / 255.0f;
        dst[c * plane + p] = (v - norm.mean[c]) / norm.stddev[c];
      }
    }
  }
  d.validate();
  return d;
}

std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir, const CifarNormalization& norm) {
  Dataset train;
  train.split = "train";
  bool any = false;
  for (int i = 1; i <= 5; ++i) {
    const auto file = dir / ("data_batch_" + std::to_string(i) + ".bin");
    if (!std::filesystem::exists(file)) continue;
    Dataset part = load_cifar10_file(file, "train", norm);
    train.labels.insert(train.labels.end(), part.labels.begin(), part.labels.end());
    train.images.insert(train.images.end(), part.images.begin(), part.images.end());
    any = true;
  }
  if (!any) throw FormatError(dir.string() + ": no data_batch_*.bin files");
  const auto test_file = dir / "test_batch.bin";
  if (!std::filesystem::exists(test_file)) throw FormatError(dir.string() + ": missing test_batch.bin");
  return {std::move(train), load_cifar10_file(test_file, "test", norm)};
}

std::string synthetic_cifar_records(std::size_t records, std::uint64_t seed) {
  static constexpr float kColors[5][3] = {
      {0.75f, 0.30f, 0.30f}, {0.30f, 0.70f, 0.35f}, {0.30f, 0.40f, 0.80f}, {0.75f, 0.70f, 0.30f}, {0.60f, 0.35f, 0.70f}};
  static constexpr float kFrequency[2] = {1.5f, 4.0f};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> label_dist(0, 9);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::normal_distribution<float> noise(0.0f, 0.10f);
  std::string out(records * kCifarRecordBytes, '\0');
  for (std::size_t r = 0; r < records; ++r) {
    const int label = label_dist(rng);
    const float* color = kColors[label % 5];
    const float freq = kFrequency[label / 5] * (0.85f + 0.3f * unit(rng));
    const float theta = std::numbers::pi_v<float> * unit(rng);
    const float phase = 2.0f * std::numbers::pi_v<float> * unit(rng);
    const float contrast = 0.15f + 0.15f * unit(rng);
    float jitter[3];
    for (float& j : jitter) j = 0.24f * (unit(rng) - 0.5f);
    auto* rec = reinterpret_cast<unsigned char*>(out.data()) + r * kCifarRecordBytes;
    rec[0] = static_cast<unsigned char>(label);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const float u = (x * std::cos(theta) + y * std::sin(theta)) / 32.0f;
        const float wave = contrast * std::sin(2.0f * std::numbers::pi_v<float> * freq * u + phase);
        for (int c = 0; c < 3; ++c) {
          const float v = std::clamp(color[c] + jitter[c] + wave + noise(rng), 0.0f, 1.0f);
          rec[1 + c * 1024 + y * 32 + x] = static_cast<unsigned char>(std::lround(v * 255.0f));
        }
      }
    }
  }
  return out;
}

void write_synthetic_cifar(const std::filesystem::path& dir, std::uint64_t seed) {
  write_file_atomic(dir / "data_batch_1.bin", synthetic_cifar_records(kCifarRecordsPerFile, seed));
  write_file_atomic(dir / "test_batch.bin", synthetic_cifar_records(kCifarRecordsPerFile, seed + 1));
}

AugmentParams draw_augment(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> offset(0, 2 * kAugmentPad);
  std::bernoulli_distribution coin(0.5);
  AugmentParams p;
  p.offset_y = offset(rng);
  p.offset_x = offset(rng);
  p.flip = coin(rng);
  return p;
}

std::vector<float> apply_augment(std::span<const float> image, std::int64_t channels, std::int64_t height,
                                 std::int64_t width, const AugmentParams& params) {
  std::vector<float> out(static_cast<std::size_t>(channels * height * width), 0.0f);
  for (std::int64_t c = 0; c < channels; ++c) {
    for (std::int64_t y = 0; y < height; ++y) {
      const std::int64_t sy = y + params.offset_y - kAugmentPad;
      if (sy < 0 || sy >= height) continue;
      for (std::int64_t x = 0; x < width; ++x) {
        const std::int64_t cx = params.flip ? width - 1 - x : x;
        const std::int64_t sx = cx + params.offset_x - kAugmentPad;
        if (sx < 0 || sx >= width) continue;
        out[(c * height + y) * width + x] = image[(c * height + sy) * width + sx];
      }
    }
  }
  return out;
}

std::vector<float> augment(std::span<const float> image, std::int64_t channels, std::int64_t height,
                           std::int64_t width, std::mt19937_64& rng) {
  return apply_augment(image, channels, height, width, draw_augment(rng));
}

template <typename T>
Tensor<T> make_batch(const Dataset& data, std::span<const std::size_t> indices,
                     const std::vector<AugmentParams>* augmentation) {
  const auto n = static_cast<std::int64_t>(indices.size());
  Tensor<T> batch({n, data.channels, data.height, data.width});
  const std::int64_t size = data.image_size();
  T* dst = batch.data().data();
  for (std::int64_t i = 0; i < n; ++i) {
    const auto img = data.image(indices[i]);
    if (augmentation) {
      const auto aug = apply_augment(img, data.channels, data.height, data.width, (*augmentation)[i]);
      std::copy(aug.begin(), aug.end(), dst + i * size);
    } else {
      std::copy(img.begin(), img.end(), dst + i * size);
    }
  }
  return batch;
}

template Tensor<float> make_batch(const Dataset&, std::span<const std::size_t>, const std::vector<AugmentParams>*);
template Tensor<double> make_batch(const Dataset&, std::span<const std::size_t>, const std::vector<AugmentParams>*);

}  // namespace banet
