// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable primitives. Every op validates shapes, computes its output
// eagerly and, when gradients are enabled and any input requires them,
// records a backward closure on the thread's tape.

#pragma once

#include <span>
#include <vector>

#include "banet/tensor.hpp"

namespace banet {

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Running statistics of one batch-norm layer.
template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double momentum = kBatchNormMomentum;
  double eps = kBatchNormEpsilon;

  BatchNormState() = default;
  explicit BatchNormState(std::int64_t features)
      : running_mean(Tensor<T>::zeros({features})), running_var(Tensor<T>::ones({features})) {}
};

/// c[m,n] = Σ_k a[m,k]·b[k,n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Cross-correlation of B×Cin×H×W input with Cout×Cin×k×k weight. No bias.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, std::int64_t stride, std::int64_t padding);

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& input, std::int64_t kernel, std::int64_t stride, std::int64_t padding);

/// B×C×H×W → B×C spatial mean.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Logistic function. Saturated results are clamped to the open interval (0, 1).
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Per-feature (rank 2) or per-channel (rank 4) batch normalization.
///
/// Train mode normalizes with the biased batch variance and folds the
/// unbiased variance into the running estimate; eval mode reads the running
/// estimates only.
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState<T>& state,
                    Mode mode);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// Elementwise product of equally shaped tensors.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// x[B×N] + bias[N], the bias repeated over rows.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

/// Sum of all entries as a {1} tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// out[b,c,i,j] = x[b,c,i,j]·w[b,c]
template <typename T>
Tensor<T> apply_attention(const Tensor<T>& x, const Tensor<T>& w);

/// Mean negative log-likelihood of softmax(logits) at the given labels.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

}  // namespace banet
