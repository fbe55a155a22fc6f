// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "banet/attention.hpp"
#include "test_util.hpp"

namespace banet {
namespace {

using testing::finite_difference_error;
using testing::max_abs_diff;
using testing::random_tensor;

using Matrix = std::vector<std::vector<double>>;

Matrix gap_oracle(const Tensor<double>& x) {
  const auto B = x.dim(0), C = x.dim(1), S = x.dim(2) * x.dim(3);
  Matrix out(B, std::vector<double>(C, 0.0));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c) {
      for (std::int64_t s = 0; s < S; ++s) out[b][c] += x[(b * C + c) * S + s];
      out[b][c] /= static_cast<double>(S);
    }
  return out;
}

Matrix times(const Matrix& a, const Tensor<double>& w) {
  const auto K = w.dim(0), N = w.dim(1);
  Matrix out(a.size(), std::vector<double>(N, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t k = 0; k < K; ++k) out[i][n] += a[i][k] * w[k * N + n];
  return out;
}

Matrix generate_oracle(Matrix z, const Tensor<double>& w2, const Tensor<double>& b2) {
  for (auto& row : z)
    for (auto& v : row) v = std::max(v, 0.0);
  auto out = times(z, w2);
  for (auto& row : out)
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = 1.0 / (1.0 + std::exp(-(row[c] + b2[c])));
  return out;
}

// Σ_i BN_i(gap(F_i)·W_i) with eval-mode statistics.
Matrix integrate_oracle(const std::vector<Tensor<double>>& features, const BridgeAttentionModule<double>& m) {
  Matrix total;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& br = m.branches[i];
    auto s = times(gap_oracle(features[i]), br.squeeze);
    for (auto& row : s)
      for (std::size_t j = 0; j < row.size(); ++j)
        row[j] = br.gamma[j] * (row[j] - br.bn.running_mean[j]) / std::sqrt(br.bn.running_var[j] + br.bn.eps) +
                 br.beta[j];
    if (total.empty()) {
      total = s;
    } else {
      for (std::size_t b = 0; b < s.size(); ++b)
        for (std::size_t j = 0; j < s[b].size(); ++j) total[b][j] += s[b][j];
    }
  }
  return total;
}

double max_diff(const Tensor<double>& t, const Matrix& m) {
  std::vector<double> flat;
  for (const auto& row : m) flat.insert(flat.end(), row.begin(), row.end());
  return max_abs_diff(t.data(), flat);
}

// Three-branch module on a bottleneck-like layout with randomized BN affine and running stats.
BridgeAttentionModule<double> random_module(Rng& rng) {
  auto m = BridgeAttentionModule<double>::create({1, 2, 3}, {8, 8, 32}, 32, 4, rng);
  for (auto& br : m.branches) {
    br.gamma = random_tensor({8}, rng, 0.5, 1.5);
    br.beta = random_tensor({8}, rng);
    br.bn.running_mean = random_tensor({8}, rng);
    br.bn.running_var = random_tensor({8}, rng, 0.5, 2);
  }
  m.b2 = random_tensor({32}, rng);
  return m;
}

std::vector<Tensor<double>> random_features(Rng& rng, std::int64_t batch = 3) {
  return {random_tensor({batch, 8, 8, 8}, rng), random_tensor({batch, 8, 4, 4}, rng),
          random_tensor({batch, 32, 4, 4}, rng)};
}

void zero(Tensor<double>& t) { std::fill(t.values().begin(), t.values().end(), 0.0); }

// squeeze-excitation

TEST(SeIntegrate, ZeroMatrixGivesZeroVector) {
  Rng rng(1);
  auto m = SqueezeExcite<double>::create(8, 2, rng);
  zero(m.w1);
  const auto z = se_integrate(random_tensor({2, 8, 3, 3}, rng), m);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(SeIntegrate, HandComputedCase) {
  Rng rng(2);
  auto m = SqueezeExcite<double>::create(4, 2, rng);
  m.w1 = Tensor<double>({4, 2}, {1, 0, 0, 1, 1, 1, 2, -1});
  Tensor<double> x({1, 4, 2, 2});
  for (int c = 0; c < 4; ++c)
    for (int s = 0; s < 4; ++s) x[c * 4 + s] = c + 1;
  // [1,2,3,4]·w1 = [1+3+8, 2+3-4]
  EXPECT_EQ(se_integrate(x, m).values(), (std::vector<double>{12, 1}));
}

TEST(SeIntegrate, ShapeContractAndChannelMismatch) {
  Rng rng(3);
  auto m = SqueezeExcite<double>::create(16, 4, rng);
  EXPECT_EQ(se_integrate(random_tensor({5, 16, 3, 2}, rng), m).shape(), (Shape{5, 4}));
  EXPECT_THROW(se_integrate(random_tensor({5, 8, 3, 2}, rng), m), DimensionError);
}

TEST(SeGenerate, DeadReluOrZeroMatrixGivesHalf) {
  Rng rng(4);
  auto m = SqueezeExcite<double>::create(8, 2, rng);
  const auto neg = se_generate(random_tensor({3, 4}, rng, -2, -0.1), m);
  for (double v : neg.data()) EXPECT_EQ(v, 0.5);
  zero(m.w2);
  const auto flat = se_generate(random_tensor({3, 4}, rng), m);
  for (double v : flat.data()) EXPECT_EQ(v, 0.5);
}

TEST(SeGenerate, MatchesLoopOracle) {
  Rng rng(5);
  auto m = SqueezeExcite<double>::create(12, 3, rng);
  m.b2 = random_tensor({12}, rng);
  auto z = random_tensor({4, 4}, rng);
  Matrix zm(4, std::vector<double>(4));
  for (int i = 0; i < 16; ++i) zm[i / 4][i % 4] = z[i];
  EXPECT_LE(max_diff(se_generate(z, m), generate_oracle(zm, m.w2, m.b2)), 1e-12);
}

TEST(SeAttention, IsCompositionOfStages) {
  Rng rng(6);
  auto m = SqueezeExcite<double>::create(16, 4, rng);
  m.b2 = random_tensor({16}, rng);
  auto x = random_tensor({3, 16, 5, 5}, rng);
  EXPECT_EQ(se_attention(x, m).values(), se_generate(se_integrate(x, m), m).values());
  EXPECT_LE(max_diff(se_attention(x, m), generate_oracle(times(gap_oracle(x), m.w1), m.w2, m.b2)), 1e-12);
  zero(m.w1);
  zero(m.w2);
  zero(m.b2);
  const auto half = se_attention(x, m);
  for (double v : half.data()) EXPECT_EQ(v, 0.5);
}

TEST(SqueezeExcite, ReductionMustDivideChannels) {
  Rng rng(7);
  EXPECT_THROW(SqueezeExcite<double>::create(10, 4, rng), ConfigurationError);
  EXPECT_THROW(BridgeAttentionModule<double>::create({1, 2}, {8, 10}, 10, 4, rng), ConfigurationError);
}

// bridge attention

TEST(BaIntegrate, ZeroBridgesAndIdentityBnGiveZero) {
  Rng rng(8);
  auto m = BridgeAttentionModule<double>::create({1, 2, 3}, {8, 8, 32}, 32, 4, rng);
  for (auto& br : m.branches) zero(br.squeeze);
  const auto z = ba_integrate(random_features(rng), m, Mode::eval);
  EXPECT_EQ(z.shape(), (Shape{3, 8}));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(BaIntegrate, SingleBranchReducesToSqueezeExcite) {
  Rng rng(9);
  auto se = SqueezeExcite<double>::create(32, 4, rng);
  auto m = BridgeAttentionModule<double>::create({3}, {32}, 32, 4, rng);
  m.make_degenerate(se);
  auto x = random_tensor({4, 32, 6, 6}, rng);
  EXPECT_LE(max_abs_diff(ba_integrate({x}, m, Mode::eval).data(), se_integrate(x, se).data()), 1e-12);
}

TEST(BaIntegrate, ThreeBranchesMatchPerBranchOracle) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_module(rng);
    const auto f = random_features(rng);
    EXPECT_LE(max_diff(ba_integrate(f, m, Mode::eval), integrate_oracle(f, m)), 1e-10);
  }
}

TEST(BaIntegrate, TrainModeNormalizesEachBranchOverTheBatch) {
  Rng rng(11);
  auto m = random_module(rng);
  const auto f = random_features(rng, 6);
  auto out = ba_forward(f, m, Mode::train);
  ASSERT_EQ(out.squeezed.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& s = out.squeezed[i];
    for (int j = 0; j < 8; ++j) {
      double mean = 0;
      for (int b = 0; b < 6; ++b) mean += s[b * 8 + j];
      EXPECT_NEAR(mean / 6, m.branches[i].beta[j], 1e-12);
    }
  }
  Tensor<double> total = out.squeezed[0].clone();
  for (std::size_t i = 1; i < 3; ++i)
    for (std::size_t k = 0; k < total.numel(); ++k) total[k] += out.squeezed[i][k];
  EXPECT_LE(max_abs_diff(total.data(), out.integrated.data()), 1e-15);
}

TEST(BaIntegrate, BranchCountOrChannelMismatchIsConfigurationError) {
  Rng rng(12);
  auto m = random_module(rng);
  auto f = random_features(rng);
  EXPECT_THROW(ba_integrate(std::vector<Tensor<double>>{f[0], f[2]}, m, Mode::eval), ConfigurationError);
  f[1] = random_tensor({3, 16, 4, 4}, rng);
  EXPECT_THROW(ba_integrate(f, m, Mode::eval), ConfigurationError);
  EXPECT_THROW(BridgeAttentionModule<double>::create({2, 1}, {8, 8}, 32, 4, rng), ConfigurationError);
  EXPECT_THROW(BridgeAttentionModule<double>::create({1, 2}, {8}, 32, 4, rng), ConfigurationError);
}

TEST(BaAttention, DegenerateModuleEqualsSqueezeExcite) {
  Rng rng(13);
  auto se = SqueezeExcite<double>::create(32, 4, rng);
  se.b2 = random_tensor({32}, rng);
  auto m = random_module(rng);
  m.make_degenerate(se);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_features(rng, 2);
    worst = std::max(worst, max_abs_diff(ba_attention(f, m, Mode::eval).data(), se_attention(f[2], se).data()));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(BaAttention, ZeroParametersGiveHalf) {
  Rng rng(14);
  auto m = BridgeAttentionModule<double>::create({1, 2, 3}, {8, 8, 32}, 32, 4, rng);
  for (auto& br : m.branches) zero(br.squeeze);
  zero(m.w2);
  const auto w = ba_attention(random_features(rng), m, Mode::eval);
  for (double v : w.data()) EXPECT_EQ(v, 0.5);
}

TEST(BaAttention, MatchesCompositionOracle) {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_module(rng);
    const auto f = random_features(rng);
    EXPECT_LE(max_diff(ba_attention(f, m, Mode::eval), generate_oracle(integrate_oracle(f, m), m.w2, m.b2)), 1e-10);
  }
}

TEST(BaAttention, GradientMatchesFiniteDifference) {
  Rng rng(16);
  auto m = BridgeAttentionModule<double>::create({1, 2}, {4, 8}, 8, 2, rng);
  std::vector<Tensor<double>> params;
  for (auto& br : m.branches) {
    for (auto* t : {&br.squeeze, &br.gamma, &br.beta}) {
      t->set_requires_grad(true);
      params.push_back(*t);
    }
  }
  m.w2.set_requires_grad(true);
  m.b2.set_requires_grad(true);
  params.push_back(m.w2);
  params.push_back(m.b2);
  auto f1 = testing::param({4, 4, 3, 3}, rng), f2 = testing::param({4, 8, 2, 2}, rng);
  params.push_back(f1);
  params.push_back(f2);
  auto target = random_tensor({4, 8}, rng);
  for (Mode mode : {Mode::train, Mode::eval}) {
    EXPECT_LE(finite_difference_error([&] { return sum(mul(ba_attention({f1, f2}, m, mode), target)); }, params),
              1e-4);
  }
}

// properties

TEST(AttentionProperties, PermutationEquivariance) {
  Rng rng(17);
  auto m = random_module(rng);
  const auto f = random_features(rng);
  std::vector<int> perm(32);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  auto permuted = m;  // shallow tensors; replace the permuted ones below
  permuted.branches[2].squeeze = m.branches[2].squeeze.clone();
  permuted.w2 = m.w2.clone();
  permuted.b2 = m.b2.clone();
  auto pf = f;
  pf[2] = f[2].clone();
  const std::int64_t S = 16, B = 3, H = 8;
  for (int c = 0; c < 32; ++c) {
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t s = 0; s < S; ++s) pf[2][(b * 32 + c) * S + s] = f[2][(b * 32 + perm[c]) * S + s];
    for (std::int64_t h = 0; h < H; ++h) {
      permuted.branches[2].squeeze[c * H + h] = m.branches[2].squeeze[perm[c] * H + h];
      permuted.w2[h * 32 + c] = m.w2[h * 32 + perm[c]];
    }
    permuted.b2[c] = m.b2[perm[c]];
  }
  const auto w = ba_attention(f, m, Mode::eval);
  const auto pw = ba_attention(pf, permuted, Mode::eval);
  for (std::int64_t b = 0; b < B; ++b)
    for (int c = 0; c < 32; ++c) EXPECT_NEAR(pw[b * 32 + c], w[b * 32 + perm[c]], 1e-12);
}

TEST(AttentionProperties, SpatialPermutationInvariance) {
  Rng rng(18);
  auto m = random_module(rng);
  auto f = random_features(rng);
  const auto before = ba_attention(f, m, Mode::eval);
  for (auto& t : f) {
    const auto S = t.dim(2) * t.dim(3);
    std::vector<std::int64_t> perm(S);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto copy = t.clone();
    for (std::int64_t p = 0; p < t.dim(0) * t.dim(1); ++p)
      for (std::int64_t s = 0; s < S; ++s) t[p * S + s] = copy[p * S + perm[s]];
  }
  EXPECT_LE(max_abs_diff(ba_attention(f, m, Mode::eval).data(), before.data()), 1e-12);
}

TEST(AttentionProperties, EvalBatchIndependence) {
  Rng rng(19);
  auto m = random_module(rng);
  const auto f = random_features(rng, 4);
  const auto batched = ba_attention(f, m, Mode::eval);
  for (std::int64_t b = 0; b < 4; ++b) {
    std::vector<Tensor<double>> single;
    for (const auto& t : f) {
      const auto per = t.numel() / 4;
      std::vector<double> v(t.data().begin() + b * per, t.data().begin() + (b + 1) * per);
      single.emplace_back(Shape{1, t.dim(1), t.dim(2), t.dim(3)}, std::move(v));
    }
    const auto w = ba_attention(single, m, Mode::eval);
    for (int c = 0; c < 32; ++c) EXPECT_NEAR(w[c], batched[b * 32 + c], 1e-12);
  }
}

TEST(AttentionProperties, WeightsStayInOpenUnitInterval) {
  Rng rng(20);
  const auto before = attention_range_stats();
  for (double magnitude : {1.0, 1e2, 1e4}) {
    auto m = random_module(rng);
    auto f = random_features(rng);
    for (auto& t : f)
      for (auto& v : t.data()) v *= magnitude;
    for (const auto& w : {ba_attention(f, m, Mode::eval), ba_attention(f, m, Mode::train)})
      for (double v : w.data()) EXPECT_TRUE(v > 0.0 && v < 1.0) << v;
    auto se = SqueezeExcite<double>::create(32, 4, rng);
    const auto w = se_attention(f[2], se);
    for (double v : w.data()) EXPECT_TRUE(v > 0.0 && v < 1.0) << v;
  }
  const auto after = attention_range_stats();
  EXPECT_GT(after.emitted, before.emitted);
  EXPECT_EQ(after.violations, before.violations);
}

}  // namespace
}  // namespace banet
