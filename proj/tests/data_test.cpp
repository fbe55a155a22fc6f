// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>

#include "banet/data.hpp"
#include "banet/io.hpp"
#include "test_util.hpp"

namespace banet {
namespace {

using testing::TempDir;

std::vector<float> ramp_image(std::int64_t c, std::int64_t h, std::int64_t w) {
  std::vector<float> v(c * h * w);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) + 1;
  return v;
}

TEST(Cifar, FullFileGivesTenThousandImages) {
  TempDir dir;
  write_file_atomic(dir / "batch.bin", synthetic_cifar_records(kCifarRecordsPerFile, 3));
  const auto d = load_cifar10_file(dir / "batch.bin", "train");
  EXPECT_EQ(d.size(), 10000u);
  EXPECT_EQ(d.images.size(), 10000u * 3 * 32 * 32);
  EXPECT_EQ(d.image_size(), 3 * 32 * 32);
  for (int label : d.labels) ASSERT_TRUE(label >= 0 && label < 10);
}

TEST(Cifar, TruncatedFileIsFormatErrorNamingByteCounts) {
  TempDir dir;
  auto bytes = synthetic_cifar_records(kCifarRecordsPerFile, 4);
  bytes.pop_back();
  write_file_atomic(dir / "short.bin", bytes);
  try {
    load_cifar10_file(dir / "short.bin", "train");
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("30730000"), std::string::npos) << msg;
    EXPECT_NE(msg.find("30729999"), std::string::npos) << msg;
  }
}

TEST(Cifar, FirstRecordNormalizedByHand) {
  TempDir dir;
  std::string bytes(kCifarRecordBytes * kCifarRecordsPerFile, '\0');
  bytes[0] = 7;
  const unsigned char planes[3] = {255, 0, 128};
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < 1024; ++p) bytes[1 + c * 1024 + p] = static_cast<char>(planes[c]);
  bytes[1 + 5] = static_cast<char>(51);  // red channel, row 0, column 5
  write_file_atomic(dir / "hand.bin", bytes);
  const auto d = load_cifar10_file(dir / "hand.bin", "test");
  EXPECT_EQ(d.labels[0], 7);
  EXPECT_EQ(d.labels[1], 0);
  const double mean[3] = {0.4914, 0.4822, 0.4465}, stddev[3] = {0.2470, 0.2435, 0.2616};
  const auto img = d.image(0);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(img[c * 1024 + 100], (planes[c] / 255.0 - mean[c]) / stddev[c], 1e-6);
  EXPECT_NEAR(img[5], (0.2 - mean[0]) / stddev[0], 1e-6);
  EXPECT_NEAR(d.image(1)[0], -mean[0] / stddev[0], 1e-6);
}

TEST(Cifar, DirectoryLoadAndMissingFiles) {
  TempDir dir;
  write_synthetic_cifar(dir.path(), 5);
  const auto [train, test] = load_cifar10(dir.path());
  EXPECT_EQ(train.size(), 10000u);
  EXPECT_EQ(test.size(), 10000u);
  EXPECT_NE(train.images, test.images);
  TempDir empty;
  EXPECT_THROW(load_cifar10(empty.path()), FormatError);
}

TEST(Cifar, SyntheticRecordsAreSeedDeterministic) {
  EXPECT_EQ(synthetic_cifar_records(20, 9), synthetic_cifar_records(20, 9));
  EXPECT_NE(synthetic_cifar_records(20, 9), synthetic_cifar_records(20, 10));
}

TEST(Dataset, HeadAndFilter) {
  TempDir dir;
  write_file_atomic(dir / "b.bin", synthetic_cifar_records(kCifarRecordsPerFile, 6));
  const auto d = load_cifar10_file(dir / "b.bin", "train");
  const auto h = d.head(10);
  EXPECT_EQ(h.size(), 10u);
  EXPECT_EQ(std::vector<float>(h.image(9).begin(), h.image(9).end()),
            std::vector<float>(d.image(9).begin(), d.image(9).end()));
  const auto f = d.filter({2, 5});
  for (int l : f.labels) EXPECT_TRUE(l == 2 || l == 5);
  EXPECT_EQ(f.size(), static_cast<std::size_t>(std::count(d.labels.begin(), d.labels.end(), 2) +
                                               std::count(d.labels.begin(), d.labels.end(), 5)));
}

TEST(Augment, CenterCropIsIdentity) {
  const auto img = ramp_image(3, 32, 32);
  EXPECT_EQ(apply_augment(img, 3, 32, 32, {4, 4, false}), img);
}

TEST(Augment, FlipIsAnInvolution) {
  const auto img = ramp_image(3, 32, 32);
  const auto once = apply_augment(img, 3, 32, 32, {4, 4, true});
  EXPECT_NE(once, img);
  EXPECT_EQ(once[0], img[31]);
  EXPECT_EQ(apply_augment(once, 3, 32, 32, {4, 4, true}), img);
}

TEST(Augment, OffsetsShiftWithZeroPadding) {
  const auto img = ramp_image(1, 6, 5);
  const auto out = apply_augment(img, 1, 6, 5, {0, 2, false});
  // Crop origin is (-4, -2) in image coordinates.
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 5; ++x) {
      const int sy = y - 4, sx = x - 2;
      const float expect = sy >= 0 && sx >= 0 && sy < 6 && sx < 5 ? img[sy * 5 + sx] : 0.0f;
      EXPECT_EQ(out[y * 5 + x], expect) << y << "," << x;
    }
}

TEST(Augment, DrawsCoverTheRange) {
  std::mt19937_64 rng(7);
  int flips = 0, lo = 8, hi = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto p = draw_augment(rng);
    flips += p.flip;
    lo = std::min({lo, p.offset_x, p.offset_y});
    hi = std::max({hi, p.offset_x, p.offset_y});
  }
  EXPECT_EQ(lo, 0);
  EXPECT_EQ(hi, 2 * kAugmentPad);
  EXPECT_NEAR(flips / 2000.0, 0.5, 0.05);
}

TEST(Augment, FixedSeedReplaysBitIdenticalBatch) {
  TempDir dir;
  write_file_atomic(dir / "b.bin", synthetic_cifar_records(kCifarRecordsPerFile, 8));
  const auto d = load_cifar10_file(dir / "b.bin", "train").head(16);
  auto run = [&] {
    std::mt19937_64 rng(11);
    std::vector<AugmentParams> aug;
    for (int i = 0; i < 16; ++i) aug.push_back(draw_augment(rng));
    std::vector<std::size_t> idx(16);
    std::iota(idx.begin(), idx.end(), 0);
    return make_batch<float>(d, idx, &aug).values();
  };
  EXPECT_EQ(run(), run());
}

TEST(MakeBatch, GathersRequestedSamples) {
  TempDir dir;
  write_file_atomic(dir / "b.bin", synthetic_cifar_records(kCifarRecordsPerFile, 9));
  const auto d = load_cifar10_file(dir / "b.bin", "train");
  const std::vector<std::size_t> idx{5, 2};
  const auto batch = make_batch<double>(d, idx);
  EXPECT_EQ(batch.shape(), (Shape{2, 3, 32, 32}));
  EXPECT_EQ(batch[0], static_cast<double>(d.image(5)[0]));
  EXPECT_EQ(batch[3072 + 17], static_cast<double>(d.image(2)[17]));
}

}  // namespace
}  // namespace banet
