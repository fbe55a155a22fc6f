// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "banet/ops.hpp"
#include "test_util.hpp"

namespace banet {
namespace {

using testing::param;

TEST(Tensor, ShapeMatchesDataLength) {
  Tensor<double> t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.dim(2), 4);
  EXPECT_THROW(Tensor<double>({2, 0}), DimensionError);
  EXPECT_THROW(Tensor<double>({2, -1}), DimensionError);
  EXPECT_THROW(Tensor<double>(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Tensor, GradPresentIffRequested) {
  Tensor<double> t({3});
  EXPECT_TRUE(t.grad().empty());
  t.set_requires_grad(true);
  ASSERT_EQ(t.grad().size(), 3u);
  for (double g : t.grad()) EXPECT_EQ(g, 0.0);
  t.set_requires_grad(false);
  EXPECT_TRUE(t.grad().empty());
}

TEST(Tensor, ItemNeedsSingleElement) {
  EXPECT_EQ(Tensor<double>::scalar(2.5).item(), 2.5);
  EXPECT_THROW(Tensor<double>({2}).item(), RankError);
}

TEST(Tensor, CloneIsIndependent) {
  auto a = Tensor<double>::full({2}, 1.0);
  auto b = a.clone();
  b[0] = 5;
  EXPECT_EQ(a[0], 1.0);
  auto r = a.reshaped({2, 1});
  EXPECT_EQ(r.shape(), (Shape{2, 1}));
  EXPECT_THROW(a.reshaped({3}), DimensionError);
}

TEST(Tape, EmptyAfterReset) {
  Rng rng(1);
  auto x = param({4}, rng);
  auto y = sum(relu(x));
  EXPECT_FALSE(Tape<double>::current().empty());
  reset_tape<double>();
  EXPECT_TRUE(Tape<double>::current().empty());
}

TEST(Tape, BackwardVisitsEveryNodeOnce) {
  Rng rng(2);
  auto x = param({3}, rng);
  auto a = relu(x);
  auto b = sigmoid(a);
  auto loss = sum(add(a, b));
  auto& tape = Tape<double>::current();
  const auto recorded = tape.size();
  std::vector<int> visits(recorded, 0);
  // Wrap each recorded closure with a counter.
  auto& nodes = const_cast<std::vector<Tape<double>::Node>&>(tape.nodes());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto inner = nodes[i].backward;
    nodes[i].backward = [inner, &visits, i] {
      ++visits[i];
      inner();
    };
  }
  backward(loss);
  for (int v : visits) EXPECT_EQ(v, 1);
  reset_tape<double>();
}

TEST(Backward, SumGivesOnes) {
  Rng rng(3);
  auto x = param({2, 3}, rng);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  reset_tape<double>();
}

TEST(Backward, ZeroTimesAnythingGivesZeroGrads) {
  Rng rng(4);
  auto x = param({5}, rng);
  auto w = param({5}, rng);
  backward(scale(sum(mul(sigmoid(x), w)), 0.0));
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
  for (double g : w.grad()) EXPECT_EQ(g, 0.0);
  reset_tape<double>();
}

TEST(Backward, UnusedTensorKeepsZeroGrad) {
  Rng rng(5);
  auto used = param({3}, rng);
  auto unused = param({3}, rng);
  auto side = relu(unused);  // recorded, but not on the path to the loss
  backward(sum(sigmoid(used)));
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
  for (double g : side.grad()) EXPECT_EQ(g, 0.0);
  reset_tape<double>();
}

TEST(Backward, RepeatedCallsAccumulateLeafGrads) {
  Rng rng(6);
  auto x = param({4}, rng);
  auto loss = sum(mul(x, x));
  backward(loss);
  std::vector<double> once(x.grad().begin(), x.grad().end());
  backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2 * once[i]);
  reset_tape<double>();
}

TEST(Backward, NonScalarLossIsRankError) {
  Rng rng(7);
  auto x = param({3}, rng);
  EXPECT_THROW(backward(relu(x)), RankError);
  reset_tape<double>();
}

TEST(NoGrad, SuppressesRecording) {
  Rng rng(8);
  auto x = param({3}, rng);
  {
    NoGradGuard guard;
    auto y = relu(x);
    EXPECT_TRUE(Tape<double>::current().empty());
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
}

}  // namespace
}  // namespace banet
