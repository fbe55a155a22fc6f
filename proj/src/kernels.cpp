// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "banet/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace banet::kernels {

namespace {

thread_local Backend active_backend = Backend::parallel;

// Upper bound on im2col buffer elements per batch chunk; small enough to stay in L2.
constexpr std::int64_t kColumnBudget = std::int64_t{1} << 16;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void im2col(const ConvGeometry& g, const T* input, std::int64_t b0, std::int64_t nb, T* col) {
  const std::int64_t positions = g.positions();
  const std::int64_t width = nb * positions;
  const std::int64_t rows = g.patch();
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int64_t ci = r / (g.kernel * g.kernel);
    const std::int64_t kh = (r / g.kernel) % g.kernel;
    const std::int64_t kw = r % g.kernel;
    T* dst = col + r * width;
    for (std::int64_t bb = 0; bb < nb; ++bb) {
      const T* plane = input + ((b0 + bb) * g.in_ch + ci) * g.in_h * g.in_w;
      T* out = dst + bb * positions;
      for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
        const std::int64_t ih = oh * g.stride - g.padding + kh;
        T* row = out + oh * g.out_w;
        if (ih < 0 || ih >= g.in_h) {
          std::fill(row, row + g.out_w, T(0));
          continue;
        }
        const T* src = plane + ih * g.in_w;
        // Columns whose tap lands inside the row: lo ≤ ow < hi.
        const std::int64_t shift = kw - g.padding;
        const std::int64_t lo = std::min(g.out_w, std::max<std::int64_t>(0, (-shift + g.stride - 1) / g.stride));
        const std::int64_t hi =
            std::max(lo, std::min(g.out_w, (g.in_w - shift + g.stride - 1) / g.stride));
        std::fill(row, row + lo, T(0));
        if (g.stride == 1) {
          std::copy(src + lo + shift, src + hi + shift, row + lo);
        } else {
          for (std::int64_t ow = lo; ow < hi; ++ow) row[ow] = src[ow * g.stride + shift];
        }
        std::fill(row + hi, row + g.out_w, T(0));
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, std::int64_t b0, std::int64_t nb, T* grad_input) {
  const std::int64_t positions = g.positions();
  const std::int64_t width = nb * positions;
  const std::int64_t k2 = g.kernel * g.kernel;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t bb = 0; bb < nb; ++bb) {
    for (std::int64_t ci = 0; ci < g.in_ch; ++ci) {
      T* plane = grad_input + ((b0 + bb) * g.in_ch + ci) * g.in_h * g.in_w;
      for (std::int64_t kk = 0; kk < k2; ++kk) {
        const std::int64_t kh = kk / g.kernel;
        const std::int64_t kw = kk % g.kernel;
        const T* src = col + (ci * k2 + kk) * width + bb * positions;
        for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
          const std::int64_t ih = oh * g.stride - g.padding + kh;
          if (ih < 0 || ih >= g.in_h) continue;
          T* dst = plane + ih * g.in_w;
          const T* s = src + oh * g.out_w;
          for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
            const std::int64_t iw = ow * g.stride - g.padding + kw;
            if (iw >= 0 && iw < g.in_w) dst[iw] += s[ow];
          }
        }
      }
    }
  }
}

std::int64_t chunk_size(const ConvGeometry& g) {
  const std::int64_t per_sample = std::max<std::int64_t>(1, g.patch() * g.positions());
  return std::clamp<std::int64_t>(kColumnBudget / per_sample, 1, g.batch);
}

}  // namespace

Backend backend() { return active_backend; }
void set_backend(Backend b) { active_backend = b; }

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

ConvGeometry ConvGeometry::make(std::int64_t batch, std::int64_t in_ch, std::int64_t in_h, std::int64_t in_w,
                                std::int64_t out_ch, std::int64_t kernel, std::int64_t stride,
                                std::int64_t padding) {
  if (stride < 1 || padding < 0 || kernel < 1) {
    throw DimensionError("conv2d: invalid stride/padding/kernel " + std::to_string(stride) + "/" +
                         std::to_string(padding) + "/" + std::to_string(kernel));
  }
  if (kernel > in_h + 2 * padding || kernel > in_w + 2 * padding) {
    throw DimensionError("conv2d: kernel " + std::to_string(kernel) + " larger than padded input " +
                         std::to_string(in_h + 2 * padding) + "x" + std::to_string(in_w + 2 * padding));
  }
  ConvGeometry g;
  g.batch = batch;
  g.in_ch = in_ch;
  g.in_h = in_h;
  g.in_w = in_w;
  g.out_ch = out_ch;
  g.kernel = kernel;
  g.stride = stride;
  g.padding = padding;
  g.out_h = (in_h + 2 * padding - kernel) / stride + 1;
  g.out_w = (in_w + 2 * padding - kernel) / stride + 1;
  return g;
}

template <typename T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, T alpha, const T* a,
          const T* b, T beta, T* c) {
  Eigen::Map<RowMatrix<T>> out(c, m, n);
  Eigen::Map<const RowMatrix<T>> lhs(a, trans_a ? k : m, trans_a ? m : k);
  Eigen::Map<const RowMatrix<T>> rhs(b, trans_b ? n : k, trans_b ? k : n);
  if (beta == T(0)) {
    out.setZero();
  } else if (beta != T(1)) {
    out *= beta;
  }
  if (trans_a && trans_b) {
    out.noalias() += alpha * lhs.transpose() * rhs.transpose();
  } else if (trans_a) {
    out.noalias() += alpha * lhs.transpose() * rhs;
  } else if (trans_b) {
    out.noalias() += alpha * lhs * rhs.transpose();
  } else {
    out.noalias() += alpha * lhs * rhs;
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* input, const T* weight, T* output) {
  const std::int64_t positions = g.positions();
  const std::int64_t step = chunk_size(g);
  std::vector<T> col, result;
  for (std::int64_t b0 = 0; b0 < g.batch; b0 += step) {
    const std::int64_t nb = std::min(step, g.batch - b0);
    const std::int64_t width = nb * positions;
    col.resize(static_cast<std::size_t>(g.patch() * width));
    im2col(g, input, b0, nb, col.data());
    // A single sample's out_ch × positions product is already in NCHW order.
    if (nb == 1) {
      gemm<T>(false, false, g.out_ch, width, g.patch(), T(1), weight, col.data(), T(0),
              output + b0 * g.out_ch * positions);
      continue;
    }
    result.resize(static_cast<std::size_t>(g.out_ch * width));
    gemm<T>(false, false, g.out_ch, width, g.patch(), T(1), weight, col.data(), T(0), result.data());
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t bb = 0; bb < nb; ++bb) {
      for (std::int64_t co = 0; co < g.out_ch; ++co) {
        const T* src = result.data() + co * width + bb * positions;
        std::copy(src, src + positions, output + ((b0 + bb) * g.out_ch + co) * positions);
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* input, const T* weight, const T* grad_output, T* grad_input,
                     T* grad_weight) {
  if (!grad_input && !grad_weight) return;
  const std::int64_t positions = g.positions();
  // Transposed-kernel correlation needs a non-negative complementary padding.
  const bool via_flipped = g.stride == 1 && g.padding < g.kernel;
  const std::int64_t step = chunk_size(g);
  std::vector<T> col, dy;
  for (std::int64_t b0 = 0; b0 < g.batch && (grad_weight || !via_flipped); b0 += step) {
    const std::int64_t nb = std::min(step, g.batch - b0);
    const std::int64_t width = nb * positions;
    const T* dyc = grad_output + b0 * g.out_ch * positions;
    if (nb > 1) {
      dy.resize(static_cast<std::size_t>(g.out_ch * width));
#pragma omp parallel for collapse(2) schedule(static)
      for (std::int64_t bb = 0; bb < nb; ++bb) {
        for (std::int64_t co = 0; co < g.out_ch; ++co) {
          const T* src = grad_output + ((b0 + bb) * g.out_ch + co) * positions;
          std::copy(src, src + positions, dy.data() + co * width + bb * positions);
        }
      }
      dyc = dy.data();
    }
    col.resize(static_cast<std::size_t>(g.patch() * width));
    if (grad_weight) {
      im2col(g, input, b0, nb, col.data());
      gemm<T>(false, true, g.out_ch, g.patch(), width, T(1), dyc, col.data(), T(1), grad_weight);
    }
    if (grad_input && !via_flipped) {
      gemm<T>(true, false, g.patch(), width, g.out_ch, T(1), weight, dyc, T(0), col.data());
      col2im_add(g, col.data(), b0, nb, grad_input);
    }
  }
  if (grad_input && via_flipped) {
    // At unit stride the input gradient is a correlation of grad_output with
    // the flipped, channel-transposed kernel.
    const std::int64_t k = g.kernel;
    std::vector<T> flipped(static_cast<std::size_t>(g.in_ch * g.out_ch * k * k));
    for (std::int64_t co = 0; co < g.out_ch; ++co) {
      for (std::int64_t ci = 0; ci < g.in_ch; ++ci) {
        for (std::int64_t kk = 0; kk < k * k; ++kk) {
          flipped[(ci * g.out_ch + co) * k * k + (k * k - 1 - kk)] = weight[(co * g.in_ch + ci) * k * k + kk];
        }
      }
    }
    const auto t = ConvGeometry::make(g.batch, g.out_ch, g.out_h, g.out_w, g.in_ch, k, 1, k - 1 - g.padding);
    std::vector<T> dx(static_cast<std::size_t>(g.batch * g.in_ch * g.in_h * g.in_w));
    conv2d_forward(t, grad_output, flipped.data(), dx.data());
    const auto n = static_cast<std::int64_t>(dx.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) grad_input[i] += dx[i];
  }
}

namespace reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, T alpha, const T* a,
          const T* b, T beta, T* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      T acc = T(0);
      for (std::int64_t p = 0; p < k; ++p) {
        const T av = trans_a ? a[p * m + i] : a[i * k + p];
        const T bv = trans_b ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      T& out = c[i * n + j];
      out = (beta == T(0) ? T(0) : beta * out) + alpha * acc;
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* input, const T* weight, T* output) {
  for (std::int64_t b = 0; b < g.batch; ++b) {
    for (std::int64_t co = 0; co < g.out_ch; ++co) {
      for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
        for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
          T acc = T(0);
          for (std::int64_t ci = 0; ci < g.in_ch; ++ci) {
            for (std::int64_t kh = 0; kh < g.kernel; ++kh) {
              const std::int64_t ih = oh * g.stride - g.padding + kh;
              if (ih < 0 || ih >= g.in_h) continue;
              for (std::int64_t kw = 0; kw < g.kernel; ++kw) {
                const std::int64_t iw = ow * g.stride - g.padding + kw;
                if (iw < 0 || iw >= g.in_w) continue;
                acc += input[((b * g.in_ch + ci) * g.in_h + ih) * g.in_w + iw] *
                       weight[((co * g.in_ch + ci) * g.kernel + kh) * g.kernel + kw];
              }
            }
          }
          output[((b * g.out_ch + co) * g.out_h + oh) * g.out_w + ow] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* input, const T* weight, const T* grad_output, T* grad_input,
                     T* grad_weight) {
  for (std::int64_t b = 0; b < g.batch; ++b) {
    for (std::int64_t co = 0; co < g.out_ch; ++co) {
      for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
        for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
          const T go = grad_output[((b * g.out_ch + co) * g.out_h + oh) * g.out_w + ow];
          for (std::int64_t ci = 0; ci < g.in_ch; ++ci) {
            for (std::int64_t kh = 0; kh < g.kernel; ++kh) {
              const std::int64_t ih = oh * g.stride - g.padding + kh;
              if (ih < 0 || ih >= g.in_h) continue;
              for (std::int64_t kw = 0; kw < g.kernel; ++kw) {
                const std::int64_t iw = ow * g.stride - g.padding + kw;
                if (iw < 0 || iw >= g.in_w) continue;
                const std::int64_t xi = ((b * g.in_ch + ci) * g.in_h + ih) * g.in_w + iw;
                const std::int64_t wi = ((co * g.in_ch + ci) * g.kernel + kh) * g.kernel + kw;
                if (grad_input) grad_input[xi] += go * weight[wi];
                if (grad_weight) grad_weight[wi] += go * input[xi];
              }
            }
          }
        }
      }
    }
  }
}

template void gemm<float>(bool, bool, std::int64_t, std::int64_t, std::int64_t, float, const float*, const float*,
                          float, float*);
template void gemm<double>(bool, bool, std::int64_t, std::int64_t, std::int64_t, double, const double*,
                           const double*, double, double*);
template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*, float*, float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*, const double*, double*,
                                      double*);

}  // namespace reference

template void gemm<float>(bool, bool, std::int64_t, std::int64_t, std::int64_t, float, const float*, const float*,
                          float, float*);
template void gemm<double>(bool, bool, std::int64_t, std::int64_t, std::int64_t, double, const double*,
                           const double*, double, double*);
template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*, float*, float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*, const double*, double*,
                                      double*);

}  // namespace banet::kernels
