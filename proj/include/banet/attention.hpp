// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

// Channel attention split into an integration stage, which turns feature maps
// into a reduced vector, and a generation stage, which turns that vector into
// per-channel weights in (0, 1).
//
//   squeeze-excitation:  z = gap(X)·W1
//   bridge attention:    z = Σ_i BN_i(gap(F_i)·W_i), branches in ascending order
//   generation (shared): ω = σ(ReLU(z)·W2 + b2)

#pragma once

#include <cstdint>
#include <vector>

#include "banet/init.hpp"
#include "banet/ops.hpp"

namespace banet {

inline constexpr std::int64_t kDefaultReduction = 16;

template <typename T>
struct SqueezeExcite {
  std::int64_t channels = 0;
  std::int64_t reduction = kDefaultReduction;
  Tensor<T> w1;  // channels × hidden
  Tensor<T> w2;  // hidden × channels
  Tensor<T> b2;  // channels

  std::int64_t hidden() const { return channels / reduction; }

  /// Kaiming-initialized matrices, zero bias. Throws ConfigurationError unless r divides c.
  static SqueezeExcite create(std::int64_t channels, std::int64_t reduction, Rng& rng);
};

/// One bridged layer: its squeeze matrix and the batch norm over the reduced features.
template <typename T>
struct BridgeBranch {
  int source = 0;  // 1-based index of the conv layer inside the block
  Tensor<T> squeeze;  // C_i × hidden, no bias
  Tensor<T> gamma;
  Tensor<T> beta;
  BatchNormState<T> bn;
};

template <typename T>
struct BridgeAttentionModule {
  std::int64_t out_channels = 0;
  std::int64_t reduction = kDefaultReduction;
  std::vector<BridgeBranch<T>> branches;  // ascending source index, last one is the attended layer
  Tensor<T> w2;
  Tensor<T> b2;

  std::int64_t hidden() const { return out_channels / reduction; }

  /// sources[i] names the conv layer feeding branch i and channels[i] its width.
  static BridgeAttentionModule create(const std::vector<int>& sources, const std::vector<std::int64_t>& channels,
                                      std::int64_t out_channels, std::int64_t reduction, Rng& rng);

  /// Bridges zeroed and every BN the identity in eval mode, the attended branch
  /// and the generation stage copied from `se`. Reduces to squeeze-excitation.
  void make_degenerate(const SqueezeExcite<T>& se);
};

template <typename T>
Tensor<T> se_integrate(const Tensor<T>& x, const SqueezeExcite<T>& m);

template <typename T>
Tensor<T> se_generate(const Tensor<T>& z, const SqueezeExcite<T>& m);

template <typename T>
Tensor<T> se_attention(const Tensor<T>& x, const SqueezeExcite<T>& m);

/// Generation stage shared by both mechanisms.
template <typename T>
Tensor<T> generate_attention(const Tensor<T>& z, const Tensor<T>& w2, const Tensor<T>& b2);

template <typename T>
struct BridgeAttentionOutput {
  std::vector<Tensor<T>> squeezed;  // S_i, one per branch, B × hidden
  Tensor<T> integrated;             // Σ S_i
  Tensor<T> weights;                // ω, B × out_channels
};

template <typename T>
BridgeAttentionOutput<T> ba_forward(const std::vector<Tensor<T>>& features, BridgeAttentionModule<T>& m, Mode mode);

template <typename T>
Tensor<T> ba_integrate(const std::vector<Tensor<T>>& features, BridgeAttentionModule<T>& m, Mode mode);

template <typename T>
Tensor<T> ba_attention(const std::vector<Tensor<T>>& features, BridgeAttentionModule<T>& m, Mode mode);

/// Process-wide count of emitted attention weights and of those outside (0, 1).
struct AttentionRangeStats {
  std::uint64_t emitted = 0;
  std::uint64_t violations = 0;
};
AttentionRangeStats attention_range_stats();
void reset_attention_range_stats();

}  // namespace banet
