// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>

#include "banet/checkpoint.hpp"
#include "banet/io.hpp"
#include "test_util.hpp"

namespace banet {
namespace {

using testing::random_tensor;
using testing::TempDir;

// A few train-mode passes so running statistics differ from their initial values.
template <typename T>
void warm_up(Network<T>& net, Rng& rng) {
  for (int i = 0; i < 2; ++i) {
    net.forward(random_tensor<T>({4, 3, 32, 32}, rng), Mode::train);
    reset_tape<T>();
  }
}

template <typename T>
void expect_bit_exact_round_trip(AttentionKind kind) {
  TempDir dir;
  Rng rng(1);
  auto net = Network<T>::build(resnet20(), kind, {}, 1);
  warm_up(net, rng);
  save_checkpoint(net, dir / "model.ckpt");
  auto restored = Network<T>::build(resnet20(), kind, {}, 99);
  load_checkpoint(restored, dir / "model.ckpt");
  auto x = random_tensor<T>({3, 3, 32, 32}, rng);
  NoGradGuard no_grad;
  EXPECT_EQ(net.forward(x, Mode::eval).values(), restored.forward(x, Mode::eval).values());
}

TEST(Checkpoint, RoundTripReproducesEvalLogitsBitExactly) {
  for (auto kind : {AttentionKind::none, AttentionKind::se, AttentionKind::ba}) {
    expect_bit_exact_round_trip<float>(kind);
  }
}

TEST(Checkpoint, DoubleNetworkRoundTripsThroughSinglePrecision) {
  TempDir dir;
  Rng rng(2);
  auto net = Network<double>::build(resnet20(), AttentionKind::ba, {}, 2);
  for (const auto& p : net.parameters()) {
    auto t = p.tensor;
    for (auto& v : t.data()) v = static_cast<float>(v);
  }
  save_checkpoint(net, dir / "model.ckpt");
  auto restored = Network<double>::build(resnet20(), AttentionKind::ba, {}, 3);
  load_checkpoint(restored, dir / "model.ckpt");
  auto x = random_tensor({2, 3, 32, 32}, rng);
  NoGradGuard no_grad;
  EXPECT_EQ(net.forward(x, Mode::eval).values(), restored.forward(x, Mode::eval).values());
}

TEST(Checkpoint, LayoutIsMagicThenLittleEndianEntries) {
  const std::string bytes = encode_checkpoint({{"w", {2, 1}, {1.5f, -2.0f}}});
  ASSERT_EQ(bytes.size(), 6u + 4 + 1 + 4 + 8 + 8);
  EXPECT_EQ(bytes.substr(0, 6), "BANET1");
  EXPECT_EQ(bytes.substr(6, 5), std::string("\x01\x00\x00\x00w", 5));
  EXPECT_EQ(bytes.substr(11, 12), std::string("\x02\x00\x00\x00\x02\x00\x00\x00\x01\x00\x00\x00", 12));
  float first;
  std::memcpy(&first, bytes.data() + 23, 4);
  EXPECT_EQ(first, 1.5f);
  const auto back = decode_checkpoint(bytes);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].name, "w");
  EXPECT_EQ(back[0].shape, (Shape{2, 1}));
  EXPECT_EQ(back[0].values, (std::vector<float>{1.5f, -2.0f}));
}

TEST(Checkpoint, TruncationAndBadMagicAreFormatErrors) {
  const std::string bytes = encode_checkpoint({{"a", {3}, {1, 2, 3}}, {"bb", {1, 2}, {4, 5}}});
  const std::size_t boundary = 6 + 4 + 1 + 4 + 4 + 12;  // end of the first entry
  EXPECT_EQ(decode_checkpoint(bytes.substr(0, boundary)).size(), 1u);
  for (std::size_t len = 7; len < bytes.size(); ++len) {
    if (len == boundary) continue;
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, len)), FormatError) << len;
  }
  EXPECT_THROW(decode_checkpoint("BANET2" + bytes.substr(6)), FormatError);
  EXPECT_THROW(decode_checkpoint("BAN"), FormatError);
}

TEST(Checkpoint, ArchitectureMismatchNamesTheParameter) {
  TempDir dir;
  auto ba = Network<float>::build(resnet20(), AttentionKind::ba, {}, 1);
  save_checkpoint(ba, dir / "ba.ckpt");
  auto se = Network<float>::build(resnet20(), AttentionKind::se, {}, 1);
  const auto before = se.parameters().front().tensor.values();
  try {
    load_checkpoint(se, dir / "ba.ckpt");
    FAIL() << "expected a mismatch";
  } catch (const ConfigurationError& e) {
    EXPECT_NE(std::string(e.what()).find("parameter '"), std::string::npos) << e.what();
  }
  EXPECT_EQ(se.parameters().front().tensor.values(), before);

  auto arch = resnet20();
  arch.num_classes = 7;
  auto narrow = Network<float>::build(arch, AttentionKind::ba, {}, 1);
  try {
    load_checkpoint(narrow, dir / "ba.ckpt");
    FAIL() << "expected a shape mismatch";
  } catch (const ConfigurationError& e) {
    EXPECT_NE(std::string(e.what()).find("fc"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, FileCutAtEntryBoundaryLacksParameters) {
  TempDir dir;
  auto net = Network<float>::build(resnet20(), AttentionKind::none, {}, 1);
  save_checkpoint(net, dir / "full.ckpt");
  const auto entries = decode_checkpoint(read_file(dir / "full.ckpt"));
  write_file_atomic(dir / "cut.ckpt", encode_checkpoint({entries.begin(), entries.end() - 1}));
  EXPECT_THROW(load_checkpoint(net, dir / "cut.ckpt"), ConfigurationError);
}

TEST(Checkpoint, MissingFileIsAnError) {
  TempDir dir;
  auto net = Network<float>::build(resnet20(), AttentionKind::none, {}, 1);
  EXPECT_THROW(load_checkpoint(net, dir / "absent.ckpt"), Error);
}

}  // namespace
}  // namespace banet
