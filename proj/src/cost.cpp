// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "banet/cost.hpp"

namespace banet {

namespace {

struct ConvShape {
  std::int64_t channels, h, w;
};

// Output shapes of every conv in a block, in order.
std::vector<ConvShape> conv_shapes(const BlockSpec& s, std::int64_t h, std::int64_t w) {
  const std::int64_t h2 = conv_extent(h, 3, s.stride, 1);
  const std::int64_t w2 = conv_extent(w, 3, s.stride, 1);
  if (s.kind == BlockKind::bottleneck) return {{s.mid_ch, h, w}, {s.mid_ch, h2, w2}, {s.out_ch, h2, w2}};
  return {{s.mid_ch, h2, w2}, {s.out_ch, h2, w2}};
}

}  // namespace

std::int64_t conv_extent(std::int64_t in, std::int64_t kernel, std::int64_t stride, std::int64_t padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

Cost conv_cost(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel, std::int64_t stride,
               std::int64_t padding, std::int64_t h, std::int64_t w) {
  const std::int64_t weights = in_ch * out_ch * kernel * kernel;
  const std::int64_t positions = conv_extent(h, kernel, stride, padding) * conv_extent(w, kernel, stride, padding);
  return {weights, weights * positions};
}

Cost linear_cost(std::int64_t in, std::int64_t out, bool bias) {
  const std::int64_t extra = bias ? out : 0;
  return {in * out + extra, in * out + extra};
}

Cost batchnorm_cost(std::int64_t channels, std::int64_t spatial) { return {2 * channels, 2 * channels * spatial}; }

Cost attention_cost(const BlockSpec& spec, std::int64_t in_h, std::int64_t in_w) {
  Cost c;
  if (spec.attention == AttentionKind::none) return c;
  const auto shapes = conv_shapes(spec, in_h, in_w);
  const auto& attended = shapes.back();
  const std::int64_t hidden = spec.out_ch / spec.reduction;
  std::vector<ConvShape> taps;
  if (spec.attention == AttentionKind::ba) {
    for (const int s : spec.bridge_sources.resolve(spec.conv_count())) taps.push_back(shapes[s - 1]);
  }
  taps.push_back(attended);
  for (const auto& t : taps) {
    c.flops += t.channels * t.h * t.w;  // global pooling
    c += linear_cost(t.channels, hidden, false);
    if (spec.attention == AttentionKind::ba) c += batchnorm_cost(hidden, 1);
  }
  c.flops += hidden;  // ReLU
  c += linear_cost(hidden, spec.out_ch, true);
  return c;
}

Cost block_cost(const BlockSpec& spec, std::int64_t& h, std::int64_t& w) {
  Cost c;
  const auto shapes = conv_shapes(spec, h, w);
  std::int64_t in_ch = spec.in_ch, ch = h, cw = w;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const bool strided = spec.kind == BlockKind::bottleneck ? i == 1 : i == 0;
    const std::int64_t kernel = (spec.kind == BlockKind::bottleneck && i != 1) ? 1 : 3;
    c += conv_cost(in_ch, shapes[i].channels, kernel, strided ? spec.stride : 1, kernel / 2, ch, cw);
    const std::int64_t spatial = shapes[i].h * shapes[i].w;
    c += batchnorm_cost(shapes[i].channels, spatial);
    if (i + 1 < shapes.size()) c.flops += shapes[i].channels * spatial;  // inner ReLU
    in_ch = shapes[i].channels;
    ch = shapes[i].h;
    cw = shapes[i].w;
  }
  c += attention_cost(spec, h, w);
  const std::int64_t out_spatial = ch * cw;
  if (spec.downsample) {
    c += conv_cost(spec.in_ch, spec.out_ch, 1, spec.stride, 0, h, w);
    c += batchnorm_cost(spec.out_ch, out_spatial);
  }
  c.flops += spec.out_ch * out_spatial;  // final ReLU
  h = ch;
  w = cw;
  return c;
}

Cost network_cost(const ArchSpec& arch, AttentionKind attention, const BridgeSourceConfig& sources,
                  const Shape& input_shape) {
  if (input_shape.size() != 4 || input_shape[1] != arch.input_shape[0]) {
    throw DimensionError("cost: input shape " + to_string(input_shape) + " does not match architecture '" +
                         arch.name + "'");
  }
  const auto specs = arch.expand(attention, sources);
  Cost c;
  std::int64_t h = input_shape[2], w = input_shape[3];
  const auto& stem = arch.stem;
  c += conv_cost(arch.input_shape[0], stem.out_ch, stem.kernel, stem.stride, stem.padding, h, w);
  h = conv_extent(h, stem.kernel, stem.stride, stem.padding);
  w = conv_extent(w, stem.kernel, stem.stride, stem.padding);
  c += batchnorm_cost(stem.out_ch, h * w);
  c.flops += stem.out_ch * h * w;  // ReLU
  if (stem.max_pool) {
    c.flops += stem.out_ch * h * w;
    h = conv_extent(h, 3, 2, 1);
    w = conv_extent(w, 3, 2, 1);
  }
  for (const auto& spec : specs) c += block_cost(spec, h, w);
  const std::int64_t features = specs.back().out_ch;
  c.flops += features * h * w;  // global pooling
  c += linear_cost(features, arch.num_classes, true);
  c.flops *= input_shape[0];
  return c;
}

}  // namespace banet
