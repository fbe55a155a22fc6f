// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

// Raw numeric kernels behind the differentiable ops.
//
// Two implementations are kept side by side. `reference` holds plain serial
// loops that mirror the defining formulas and exist for testing and
// benchmarking. The default namespace holds the fast path: im2col lowering,
// Eigen GEMM and OpenMP loops over independent output planes. Both produce
// the same values up to floating-point reassociation; neither depends on the
// thread count for a fixed build.

#pragma once

#include <cstdint>

#include "banet/common.hpp"

namespace banet::kernels {

enum class Backend { parallel, reference };

/// Backend used by the differentiable ops on this thread.
Backend backend();
void set_backend(Backend b);

class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

/// Caps the OpenMP team size; 0 leaves the runtime default.
void set_num_threads(int n);
int num_threads();

struct ConvGeometry {
  std::int64_t batch = 0, in_ch = 0, in_h = 0, in_w = 0;
  std::int64_t out_ch = 0, kernel = 0, stride = 1, padding = 0;
  std::int64_t out_h = 0, out_w = 0;

  /// Validates the kernel against the padded input and derives the output size.
  static ConvGeometry make(std::int64_t batch, std::int64_t in_ch, std::int64_t in_h, std::int64_t in_w,
                           std::int64_t out_ch, std::int64_t kernel, std::int64_t stride, std::int64_t padding);

  std::int64_t patch() const { return in_ch * kernel * kernel; }
  std::int64_t positions() const { return out_h * out_w; }
};

// Row-major C[M×N] = alpha·op(A)·op(B) + beta·C, op = transpose when flagged.
// A is M×K (K×M if trans_a), B is K×N (N×K if trans_b).
template <typename T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, T alpha, const T* a,
          const T* b, T beta, T* c);

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* input, const T* weight, T* output);

// Accumulates into grad_input and grad_weight; either may be null.
template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* input, const T* weight, const T* grad_output, T* grad_input,
                     T* grad_weight);

namespace reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, T alpha, const T* a,
          const T* b, T beta, T* c);

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* input, const T* weight, T* output);

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* input, const T* weight, const T* grad_output, T* grad_input,
                     T* grad_weight);

}  // namespace reference

// Dispatch on backend().
template <typename T>
void gemm_dispatch(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, T alpha, const T* a,
                   const T* b, T beta, T* c) {
  if (backend() == Backend::reference) {
    reference::gemm(trans_a, trans_b, m, n, k, alpha, a, b, beta, c);
  } else {
    gemm(trans_a, trans_b, m, n, k, alpha, a, b, beta, c);
  }
}

}  // namespace banet::kernels
