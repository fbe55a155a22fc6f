// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "banet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "banet/kernels.hpp"

namespace banet {

namespace {

template <typename T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (!grad_enabled()) return false;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Gradient buffer of an input if it takes part in backward, else null.
template <typename T>
T* grad_of(const ImplPtr<T>& impl) {
  if (!impl->requires_grad || impl->grad.size() != impl->data.size()) return nullptr;
  return impl->grad.data();
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         to_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  kernels::gemm_dispatch<T>(false, false, m, n, k, T(1), a.data().data(), b.data().data(), T(0), c.data().data());
  if (should_record({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), ci = c.impl();
    Tape<T>::current().record("matmul", {ai, bi}, ci, [ai, bi, ci, m, n, k] {
      const T* dc = ci->grad.data();
      if (T* da = grad_of(ai)) kernels::gemm_dispatch<T>(false, true, m, k, n, T(1), dc, bi->data.data(), T(1), da);
      if (T* db = grad_of(bi)) kernels::gemm_dispatch<T>(true, false, k, n, m, T(1), ai->data.data(), dc, T(1), db);
    });
  }
  return c;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, std::int64_t stride, std::int64_t padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  if (weight.dim(1) != input.dim(1) || weight.dim(2) != weight.dim(3)) {
    throw DimensionError("conv2d: weight " + to_string(weight.shape()) + " incompatible with input " +
                         to_string(input.shape()));
  }
  const auto g = kernels::ConvGeometry::make(input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0),
                                             weight.dim(2), stride, padding);
  Tensor<T> out({g.batch, g.out_ch, g.out_h, g.out_w});
  const bool reference = kernels::backend() == kernels::Backend::reference;
  if (reference) {
    kernels::reference::conv2d_forward(g, input.data().data(), weight.data().data(), out.data().data());
  } else {
    kernels::conv2d_forward(g, input.data().data(), weight.data().data(), out.data().data());
  }
  if (should_record({&input, &weight})) {
    auto xi = input.impl(), wi = weight.impl(), oi = out.impl();
    Tape<T>::current().record("conv2d", {xi, wi}, oi, [xi, wi, oi, g, reference] {
      if (reference) {
        kernels::reference::conv2d_backward(g, xi->data.data(), wi->data.data(), oi->grad.data(), grad_of(xi),
                                            grad_of(wi));
      } else {
        kernels::conv2d_backward(g, xi->data.data(), wi->data.data(), oi->grad.data(), grad_of(xi), grad_of(wi));
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& input, std::int64_t kernel, std::int64_t stride, std::int64_t padding) {
  require_rank(input, 4, "max_pool2d");
  const auto g = kernels::ConvGeometry::make(input.dim(0), input.dim(1), input.dim(2), input.dim(3), input.dim(1),
                                             kernel, stride, padding);
  Tensor<T> out({g.batch, g.in_ch, g.out_h, g.out_w});
  std::vector<std::int64_t> argmax(out.numel());
  const T* x = input.data().data();
  T* y = out.data().data();
  const std::int64_t planes = g.batch * g.in_ch;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const std::int64_t in_base = p * g.in_h * g.in_w;
    for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
      for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
        T best = -std::numeric_limits<T>::infinity();
        std::int64_t best_idx = -1;
        for (std::int64_t kh = 0; kh < kernel; ++kh) {
          const std::int64_t ih = oh * stride - padding + kh;
          if (ih < 0 || ih >= g.in_h) continue;
          for (std::int64_t kw = 0; kw < kernel; ++kw) {
            const std::int64_t iw = ow * stride - padding + kw;
            if (iw < 0 || iw >= g.in_w) continue;
            const std::int64_t idx = in_base + ih * g.in_w + iw;
            if (best_idx < 0 || x[idx] > best) {
              best = x[idx];
              best_idx = idx;
            }
          }
        }
        const std::int64_t o = (p * g.out_h + oh) * g.out_w + ow;
        y[o] = best;
        argmax[o] = best_idx;
      }
    }
  }
  if (should_record({&input})) {
    auto xi = input.impl(), oi = out.impl();
    Tape<T>::current().record("max_pool2d", {xi}, oi, [xi, oi, argmax = std::move(argmax)] {
      T* dx = grad_of(xi);
      if (!dx) return;
      for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += oi->grad[o];
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank(x, 4, "global_avg_pool");
  const auto b = x.dim(0), c = x.dim(1), spatial = x.dim(2) * x.dim(3);
  Tensor<T> out({b, c});
  const T* src = x.data().data();
  T* dst = out.data().data();
  const T inv = T(1) / static_cast<T>(spatial);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < b * c; ++p) {
    T acc = T(0);
    const T* plane = src + p * spatial;
#pragma omp simd reduction(+ : acc)
    for (std::int64_t s = 0; s < spatial; ++s) acc += plane[s];
    dst[p] = acc * inv;
  }
  if (should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    Tape<T>::current().record("global_avg_pool", {xi}, oi, [xi, oi, spatial, inv] {
      T* dx = grad_of(xi);
      if (!dx) return;
      const std::int64_t planes = static_cast<std::int64_t>(oi->data.size());
#pragma omp parallel for schedule(static)
      for (std::int64_t p = 0; p < planes; ++p) {
        const T g = oi->grad[p] * inv;
        T* plane = dx + p * spatial;
        for (std::int64_t s = 0; s < spatial; ++s) plane[s] += g;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const auto n = static_cast<std::int64_t>(x.numel());
  const T* src = x.data().data();
  T* dst = out.data().data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) dst[i] = src[i] > T(0) ? src[i] : T(0);
  if (should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    Tape<T>::current().record("relu", {xi}, oi, [xi, oi, n] {
      T* __restrict dx = grad_of(xi);
      if (!dx) return;
      const T* __restrict x = xi->data.data();
      const T* __restrict dy = oi->grad.data();
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < n; ++i) dx[i] += x[i] > T(0) ? dy[i] : T(0);
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const auto n = static_cast<std::int64_t>(x.numel());
  const T* src = x.data().data();
  T* dst = out.data().data();
  const T lo = std::nextafter(T(0), T(1));
  const T hi = std::nextafter(T(1), T(0));
  for (std::int64_t i = 0; i < n; ++i) {
    const T v = src[i];
    T s;
    if (v >= T(0)) {
      s = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      s = e / (T(1) + e);
    }
    dst[i] = std::clamp(s, lo, hi);
  }
  if (should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    Tape<T>::current().record("sigmoid", {xi}, oi, [xi, oi, n] {
      T* dx = grad_of(xi);
      if (!dx) return;
      for (std::int64_t i = 0; i < n; ++i) {
        const T s = oi->data[i];
        dx[i] += oi->grad[i] * s * (T(1) - s);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState<T>& state,
                    Mode mode) {
  if (x.rank() != 2 && x.rank() != 4) {
    throw DimensionError("batchnorm: expected rank 2 or 4, got shape " + to_string(x.shape()));
  }
  const std::int64_t batch = x.dim(0);
  const std::int64_t channels = x.dim(1);
  const std::int64_t spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  const Shape expected{channels};
  if (gamma.shape() != expected || beta.shape() != expected || state.running_mean.shape() != expected ||
      state.running_var.shape() != expected) {
    throw DimensionError("batchnorm: parameters must have shape " + to_string(expected) + " for input " +
                         to_string(x.shape()));
  }
  if (mode == Mode::train && batch < 2) {
    throw BatchSizeError("batchnorm: train mode needs batch >= 2, got " + std::to_string(batch));
  }
  const std::int64_t count = batch * spatial;
  Tensor<T> out(x.shape());
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(channels);
  const T* src = x.data().data();
  T* dst = out.data().data();
  const T* g = gamma.data().data();
  const T* bt = beta.data().data();
  T* rm = state.running_mean.data().data();
  T* rv = state.running_var.data().data();
  const T eps = static_cast<T>(state.eps);
  const T momentum = static_cast<T>(state.momentum);

#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < channels; ++c) {
    T mean, var;
    if (mode == Mode::train) {
      T acc = T(0);
      for (std::int64_t b = 0; b < batch; ++b) {
        const T* p = src + (b * channels + c) * spatial;
#pragma omp simd reduction(+ : acc)
        for (std::int64_t s = 0; s < spatial; ++s) acc += p[s];
      }
      mean = acc / static_cast<T>(count);
      T sq = T(0);
      for (std::int64_t b = 0; b < batch; ++b) {
        const T* p = src + (b * channels + c) * spatial;
#pragma omp simd reduction(+ : sq)
        for (std::int64_t s = 0; s < spatial; ++s) {
          const T d = p[s] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<T>(count);
      const T unbiased = var * static_cast<T>(count) / static_cast<T>(count - 1);
      rm[c] = (T(1) - momentum) * rm[c] + momentum * mean;
      rv[c] = (T(1) - momentum) * rv[c] + momentum * unbiased;
    } else {
      mean = rm[c];
      var = rv[c];
    }
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[c] = is;
    const T gc = g[c], bc = bt[c];
    for (std::int64_t b = 0; b < batch; ++b) {
      const std::int64_t base = (b * channels + c) * spatial;
      const T* __restrict xp = src + base;
      T* __restrict hp = xhat.data() + base;
      T* __restrict yp = dst + base;
      for (std::int64_t s = 0; s < spatial; ++s) {
        const T h = (xp[s] - mean) * is;
        hp[s] = h;
        yp[s] = gc * h + bc;
      }
    }
  }

  if (should_record({&x, &gamma, &beta})) {
    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
    const bool train = mode == Mode::train;
    Tape<T>::current().record(
        "batchnorm", {xi, gi, bi}, oi,
        [xi, gi, bi, oi, xhat = std::move(xhat), inv_std = std::move(inv_std), batch, channels, spatial, count,
         train] {
          T* dx = grad_of(xi);
          T* dg = grad_of(gi);
          T* db = grad_of(bi);
          const T* dy = oi->grad.data();
#pragma omp parallel for schedule(static)
          for (std::int64_t c = 0; c < channels; ++c) {
            T sum_dy = T(0), sum_dy_xhat = T(0);
            for (std::int64_t b = 0; b < batch; ++b) {
              const std::int64_t base = (b * channels + c) * spatial;
              const T* __restrict dyp = dy + base;
              const T* __restrict hp = xhat.data() + base;
#pragma omp simd reduction(+ : sum_dy, sum_dy_xhat)
              for (std::int64_t s = 0; s < spatial; ++s) {
                sum_dy += dyp[s];
                sum_dy_xhat += dyp[s] * hp[s];
              }
            }
            if (dg) dg[c] += sum_dy_xhat;
            if (db) db[c] += sum_dy;
            if (!dx) continue;
            const T scale_c = gi->data[c] * inv_std[c];
            const T n = static_cast<T>(count);
            const T mean_dy = train ? sum_dy / n : T(0);
            const T mean_dy_xhat = train ? sum_dy_xhat / n : T(0);
            for (std::int64_t b = 0; b < batch; ++b) {
              const std::int64_t base = (b * channels + c) * spatial;
              T* __restrict dxp = dx + base;
              const T* __restrict dyp = dy + base;
              const T* __restrict hp = xhat.data() + base;
              for (std::int64_t s = 0; s < spatial; ++s) {
                dxp[s] += scale_c * (dyp[s] - mean_dy - hp[s] * mean_dy_xhat);
              }
            }
          }
        });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  const auto n = static_cast<std::int64_t>(a.numel());
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  if (should_record({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape<T>::current().record("add", {ai, bi}, oi, [ai, bi, oi, n] {
      const T* __restrict dy = oi->grad.data();
      for (T* __restrict d : {grad_of(ai), grad_of(bi)}) {
        if (!d) continue;
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) d[i] += dy[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  const auto n = static_cast<std::int64_t>(a.numel());
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
  if (should_record({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape<T>::current().record("mul", {ai, bi}, oi, [ai, bi, oi, n] {
      T* da = grad_of(ai);
      T* db = grad_of(bi);
      for (std::int64_t i = 0; i < n; ++i) {
        if (da) da[i] += oi->grad[i] * bi->data[i];
        if (db) db[i] += oi->grad[i] * ai->data[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  const auto n = static_cast<std::int64_t>(x.numel());
  for (std::int64_t i = 0; i < n; ++i) out[i] = x[i] * factor;
  if (should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    Tape<T>::current().record("scale", {xi}, oi, [xi, oi, n, factor] {
      T* dx = grad_of(xi);
      if (!dx) return;
      for (std::int64_t i = 0; i < n; ++i) dx[i] += oi->grad[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_rank(x, 2, "add_bias");
  if (bias.shape() != Shape{x.dim(1)}) {
    throw DimensionError("add_bias: bias " + to_string(bias.shape()) + " does not match rows of " +
                         to_string(x.shape()));
  }
  const auto rows = x.dim(0), cols = x.dim(1);
  Tensor<T> out(x.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] + bias[c];
  }
  if (should_record({&x, &bias})) {
    auto xi = x.impl(), bi = bias.impl(), oi = out.impl();
    Tape<T>::current().record("add_bias", {xi, bi}, oi, [xi, bi, oi, rows, cols] {
      T* dx = grad_of(xi);
      T* db = grad_of(bi);
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) {
          const T g = oi->grad[r * cols + c];
          if (dx) dx[r * cols + c] += g;
          if (db) db[c] += g;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (const T v : x.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (should_record({&x})) {
    auto xi = x.impl(), oi = out.impl();
    Tape<T>::current().record("sum", {xi}, oi, [xi, oi] {
      T* dx = grad_of(xi);
      if (!dx) return;
      for (std::size_t i = 0; i < xi->data.size(); ++i) dx[i] += oi->grad[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> apply_attention(const Tensor<T>& x, const Tensor<T>& w) {
  require_rank(x, 4, "apply_attention input");
  require_rank(w, 2, "apply_attention weights");
  if (w.dim(0) != x.dim(0) || w.dim(1) != x.dim(1)) {
    throw DimensionError("apply_attention: weights " + to_string(w.shape()) + " do not match input " +
                         to_string(x.shape()));
  }
  const std::int64_t planes = x.dim(0) * x.dim(1);
  const std::int64_t spatial = x.dim(2) * x.dim(3);
  Tensor<T> out(x.shape());
  const T* src = x.data().data();
  const T* wt = w.data().data();
  T* dst = out.data().data();
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t s = 0; s < spatial; ++s) dst[p * spatial + s] = src[p * spatial + s] * wt[p];
  }
  if (should_record({&x, &w})) {
    auto xi = x.impl(), wi = w.impl(), oi = out.impl();
    Tape<T>::current().record("apply_attention", {xi, wi}, oi, [xi, wi, oi, planes, spatial] {
      T* dx = grad_of(xi);
      T* dw = grad_of(wi);
      const T* x = xi->data.data();
      const T* dy = oi->grad.data();
#pragma omp parallel for schedule(static)
      for (std::int64_t p = 0; p < planes; ++p) {
        const T* __restrict g = dy + p * spatial;
        if (dx) {
          T* __restrict d = dx + p * spatial;
          const T wp = wi->data[p];
          for (std::int64_t s = 0; s < spatial; ++s) d[s] += g[s] * wp;
        }
        if (dw) {
          const T* __restrict xp = x + p * spatial;
          T acc = T(0);
#pragma omp simd reduction(+ : acc)
          for (std::int64_t s = 0; s < spatial; ++s) acc += g[s] * xp[s];
          dw[p] += acc;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::int64_t batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         to_string(logits.shape()));
  }
  for (const int l : labels) {
    if (l < 0 || l >= classes) {
      throw IndexError("cross_entropy: label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  std::vector<T> probs(logits.numel());
  T total = T(0);
  for (std::int64_t b = 0; b < batch; ++b) {
    const T* row = logits.data().data() + b * classes;
    const T mx = *std::max_element(row, row + classes);
    T denom = T(0);
    for (std::int64_t k = 0; k < classes; ++k) denom += std::exp(row[k] - mx);
    for (std::int64_t k = 0; k < classes; ++k) probs[b * classes + k] = std::exp(row[k] - mx) / denom;
    total += -(row[labels[b]] - mx - std::log(denom));
  }
  Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(batch));
  if (should_record({&logits})) {
    auto li = logits.impl(), oi = out.impl();
    std::vector<int> owned(labels.begin(), labels.end());
    Tape<T>::current().record(
        "cross_entropy", {li}, oi, [li, oi, probs = std::move(probs), owned = std::move(owned), batch, classes] {
          T* dl = grad_of(li);
          if (!dl) return;
          const T g = oi->grad[0] / static_cast<T>(batch);
          for (std::int64_t b = 0; b < batch; ++b) {
            for (std::int64_t k = 0; k < classes; ++k) {
              const T target = k == owned[b] ? T(1) : T(0);
              dl[b * classes + k] += g * (probs[b * classes + k] - target);
            }
          }
        });
  }
  return out;
}

#define BANET_INSTANTIATE_OPS(T)                                                                        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::int64_t, std::int64_t);           \
  template Tensor<T> max_pool2d(const Tensor<T>&, std::int64_t, std::int64_t, std::int64_t);           \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                                \
  template Tensor<T> relu(const Tensor<T>&);                                                           \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                        \
  template Tensor<T> batchnorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormState<T>&, \
                               Mode);                                                                  \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> scale(const Tensor<T>&, T);                                                       \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sum(const Tensor<T>&);                                                            \
  template Tensor<T> apply_attention(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>);

BANET_INSTANTIATE_OPS(float)
BANET_INSTANTIATE_OPS(double)

}  // namespace banet
