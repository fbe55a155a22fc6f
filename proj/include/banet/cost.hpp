// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

// Shape-only parameter and FLOP accounting.
//
// One multiply-accumulate counts as one FLOP. Per layer:
//   conv / fully connected   MACs (+ one per output for a bias)
//   batch norm               2 per element (scale and shift)
//   ReLU, pooling            1 per input element
//   attention                global pooling of every tapped feature, the
//                            squeeze/generation MACs and biases, 2 per element
//                            of each branch norm, 1 per element of the ReLU
// Sigmoid, rescaling and the residual sum are not counted.

#pragma once

#include <cstdint>

#include "banet/backbone.hpp"

namespace banet {

struct Cost {
  std::int64_t params = 0;
  std::int64_t flops = 0;

  Cost& operator+=(const Cost& o) {
    params += o.params;
    flops += o.flops;
    return *this;
  }
};

/// Spatial extent after a k×k window at the given stride and padding.
std::int64_t conv_extent(std::int64_t in, std::int64_t kernel, std::int64_t stride, std::int64_t padding);

/// Per-sample cost of a bias-free convolution on an h×w input.
Cost conv_cost(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel, std::int64_t stride,
               std::int64_t padding, std::int64_t h, std::int64_t w);
Cost linear_cost(std::int64_t in, std::int64_t out, bool bias);
Cost batchnorm_cost(std::int64_t channels, std::int64_t spatial);

/// Cost of one block on an h×w input. `h` and `w` are updated to the output size.
Cost block_cost(const BlockSpec& spec, std::int64_t& h, std::int64_t& w);

/// Only the attention part of a block (zero for attention=none).
Cost attention_cost(const BlockSpec& spec, std::int64_t in_h, std::int64_t in_w);

/// Whole network for an input of shape B×C×H×W.
Cost network_cost(const ArchSpec& arch, AttentionKind attention, const BridgeSourceConfig& sources,
                  const Shape& input_shape);

/// Trainable scalars registered by a built network.
template <typename T>
std::int64_t count_params(const Network<T>& net) {
  std::int64_t n = 0;
  for (const auto& p : net.parameters()) {
    if (p.trainable()) n += static_cast<std::int64_t>(p.tensor.numel());
  }
  return n;
}

template <typename T>
std::int64_t count_flops(const Network<T>& net, const Shape& input_shape) {
  return network_cost(net.arch(), net.attention(), net.bridge_sources(), input_shape).flops;
}

}  // namespace banet
