// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "banet/attention.hpp"

#include <algorithm>
#include <atomic>

namespace banet {

namespace {

std::atomic<std::uint64_t> emitted_weights{0};
std::atomic<std::uint64_t> out_of_range_weights{0};

template <typename T>
void monitor_range(const Tensor<T>& weights) {
  std::uint64_t bad = 0;
  for (const T v : weights.data()) {
    if (!(v > T(0) && v < T(1))) ++bad;
  }
  emitted_weights += weights.numel();
  out_of_range_weights += bad;
}

void check_reduction(std::int64_t channels, std::int64_t reduction) {
  if (channels <= 0 || reduction <= 0 || channels % reduction != 0) {
    throw ConfigurationError("attention: reduction " + std::to_string(reduction) + " must divide channel count " +
                             std::to_string(channels));
  }
}

}  // namespace

AttentionRangeStats attention_range_stats() { return {emitted_weights.load(), out_of_range_weights.load()}; }

void reset_attention_range_stats() {
  emitted_weights = 0;
  out_of_range_weights = 0;
}

template <typename T>
SqueezeExcite<T> SqueezeExcite<T>::create(std::int64_t channels, std::int64_t reduction, Rng& rng) {
  check_reduction(channels, reduction);
  SqueezeExcite m;
  m.channels = channels;
  m.reduction = reduction;
  const auto hidden = channels / reduction;
  m.w1 = kaiming_uniform<T>({channels, hidden}, channels, rng);
  m.w2 = kaiming_uniform<T>({hidden, channels}, hidden, rng);
  m.b2 = Tensor<T>::zeros({channels});
  return m;
}

template <typename T>
BridgeAttentionModule<T> BridgeAttentionModule<T>::create(const std::vector<int>& sources,
                                                          const std::vector<std::int64_t>& channels,
                                                          std::int64_t out_channels, std::int64_t reduction,
                                                          Rng& rng) {
  check_reduction(out_channels, reduction);
  if (sources.empty() || sources.size() != channels.size()) {
    throw ConfigurationError("bridge attention: " + std::to_string(sources.size()) + " sources for " +
                             std::to_string(channels.size()) + " channel counts");
  }
  for (std::size_t i = 1; i < sources.size(); ++i) {
    if (sources[i] <= sources[i - 1]) {
      throw ConfigurationError("bridge attention: branch sources must be strictly ascending");
    }
  }
  BridgeAttentionModule m;
  m.out_channels = out_channels;
  m.reduction = reduction;
  const auto hidden = out_channels / reduction;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    BridgeBranch<T> branch;
    branch.source = sources[i];
    branch.squeeze = kaiming_uniform<T>({channels[i], hidden}, channels[i], rng);
    branch.gamma = Tensor<T>::ones({hidden});
    branch.beta = Tensor<T>::zeros({hidden});
    branch.bn = BatchNormState<T>(hidden);
    m.branches.push_back(std::move(branch));
  }
  m.w2 = kaiming_uniform<T>({hidden, out_channels}, hidden, rng);
  m.b2 = Tensor<T>::zeros({out_channels});
  return m;
}

template <typename T>
void BridgeAttentionModule<T>::make_degenerate(const SqueezeExcite<T>& se) {
  if (se.channels != out_channels || se.reduction != reduction) {
    throw ConfigurationError("make_degenerate: squeeze-excitation module has a different shape");
  }
  for (std::size_t i = 0; i < branches.size(); ++i) {
    auto& b = branches[i];
    const bool attended = i + 1 == branches.size();
    auto& dst = b.squeeze.values();
    if (attended) {
      dst = se.w1.values();
    } else {
      std::fill(dst.begin(), dst.end(), T(0));
    }
    std::fill(b.gamma.values().begin(), b.gamma.values().end(), T(1));
    std::fill(b.beta.values().begin(), b.beta.values().end(), T(0));
    std::fill(b.bn.running_mean.values().begin(), b.bn.running_mean.values().end(), T(0));
    // var + eps == 1, so eval-mode BN is the identity rather than a 1/sqrt(1 + eps) scale.
    std::fill(b.bn.running_var.values().begin(), b.bn.running_var.values().end(), T(1 - b.bn.eps));
  }
  w2.values() = se.w2.values();
  b2.values() = se.b2.values();
}

template <typename T>
Tensor<T> se_integrate(const Tensor<T>& x, const SqueezeExcite<T>& m) {
  if (x.rank() != 4 || x.dim(1) != m.channels) {
    throw DimensionError("se_integrate: input " + to_string(x.shape()) + " does not have " +
                         std::to_string(m.channels) + " channels");
  }
  return matmul(global_avg_pool(x), m.w1);
}

template <typename T>
Tensor<T> generate_attention(const Tensor<T>& z, const Tensor<T>& w2, const Tensor<T>& b2) {
  if (z.rank() != 2 || z.dim(1) != w2.dim(0)) {
    throw DimensionError("generate: integrated features " + to_string(z.shape()) + " do not match " +
                         to_string(w2.shape()));
  }
  auto weights = sigmoid(add_bias(matmul(relu(z), w2), b2));
  monitor_range(weights);
  return weights;
}

template <typename T>
Tensor<T> se_generate(const Tensor<T>& z, const SqueezeExcite<T>& m) {
  return generate_attention(z, m.w2, m.b2);
}

template <typename T>
Tensor<T> se_attention(const Tensor<T>& x, const SqueezeExcite<T>& m) {
  return se_generate(se_integrate(x, m), m);
}

namespace {

template <typename T>
Tensor<T> integrate_branches(const std::vector<Tensor<T>>& features, BridgeAttentionModule<T>& m, Mode mode,
                             std::vector<Tensor<T>>* squeezed) {
  if (features.size() != m.branches.size()) {
    throw ConfigurationError("bridge attention: got " + std::to_string(features.size()) + " features for " +
                             std::to_string(m.branches.size()) + " branches");
  }
  Tensor<T> total;
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto& branch = m.branches[i];
    const auto& f = features[i];
    if (f.rank() != 4 || f.dim(1) != branch.squeeze.dim(0)) {
      throw ConfigurationError("bridge attention: branch " + std::to_string(i) + " expects " +
                               std::to_string(branch.squeeze.dim(0)) + " channels, got feature " +
                               to_string(f.shape()));
    }
    auto s = batchnorm(matmul(global_avg_pool(f), branch.squeeze), branch.gamma, branch.beta, branch.bn, mode);
    total = total.defined() ? add(total, s) : s;
    if (squeezed) squeezed->push_back(std::move(s));
  }
  return total;
}

}  // namespace

template <typename T>
BridgeAttentionOutput<T> ba_forward(const std::vector<Tensor<T>>& features, BridgeAttentionModule<T>& m, Mode mode) {
  BridgeAttentionOutput<T> out;
  out.integrated = integrate_branches(features, m, mode, &out.squeezed);
  out.weights = generate_attention(out.integrated, m.w2, m.b2);
  return out;
}

template <typename T>
Tensor<T> ba_integrate(const std::vector<Tensor<T>>& features, BridgeAttentionModule<T>& m, Mode mode) {
  return integrate_branches<T>(features, m, mode, nullptr);
}

template <typename T>
Tensor<T> ba_attention(const std::vector<Tensor<T>>& features, BridgeAttentionModule<T>& m, Mode mode) {
  return generate_attention(ba_integrate(features, m, mode), m.w2, m.b2);
}

#define BANET_INSTANTIATE_ATTENTION(T)                                                                         \
  template struct SqueezeExcite<T>;                                                                            \
  template struct BridgeAttentionModule<T>;                                                                    \
  template Tensor<T> se_integrate(const Tensor<T>&, const SqueezeExcite<T>&);                                  \
  template Tensor<T> se_generate(const Tensor<T>&, const SqueezeExcite<T>&);                                   \
  template Tensor<T> se_attention(const Tensor<T>&, const SqueezeExcite<T>&);                                  \
  template Tensor<T> generate_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template BridgeAttentionOutput<T> ba_forward(const std::vector<Tensor<T>>&, BridgeAttentionModule<T>&, Mode); \
  template Tensor<T> ba_integrate(const std::vector<Tensor<T>>&, BridgeAttentionModule<T>&, Mode);             \
  template Tensor<T> ba_attention(const std::vector<Tensor<T>>&, BridgeAttentionModule<T>&, Mode);

BANET_INSTANTIATE_ATTENTION(float)
BANET_INSTANTIATE_ATTENTION(double)

}  // namespace banet
