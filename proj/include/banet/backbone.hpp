// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "banet/attention.hpp"

namespace banet {

enum class BlockKind { basic, bottleneck };
enum class AttentionKind { none, se, ba };

std::string_view to_string(BlockKind kind);
std::string_view to_string(AttentionKind kind);
BlockKind parse_block_kind(std::string_view text);
AttentionKind parse_attention_kind(std::string_view text);

/// Which earlier conv outputs of a block feed its bridge attention.
///
/// The attended (last) conv is always included and never listed. `all`
/// selects every conv before it, resolved per block kind.
struct BridgeSourceConfig {
  bool all = true;
  std::vector<int> sources;  // 1-based conv indices, ascending

  /// Accepts "all", "conv1", "conv2", "conv1&2" or comma lists like "conv1,conv2".
  static BridgeSourceConfig parse(std::string_view text);
  std::string label() const;
  /// Bridged conv indices for a block with `conv_count` convs. Throws on out-of-block sources.
  std::vector<int> resolve(int conv_count) const;

  bool operator==(const BridgeSourceConfig&) const = default;
};

struct BlockSpec {
  BlockKind kind = BlockKind::basic;
  std::int64_t in_ch = 0;
  std::int64_t mid_ch = 0;
  std::int64_t out_ch = 0;
  std::int64_t stride = 1;
  AttentionKind attention = AttentionKind::none;
  BridgeSourceConfig bridge_sources;
  bool downsample = false;
  std::int64_t reduction = kDefaultReduction;

  int conv_count() const { return kind == BlockKind::bottleneck ? 3 : 2; }
  bool needs_projection() const { return stride != 1 || in_ch != out_ch; }
  void validate() const;
};

struct StemSpec {
  std::int64_t out_ch = 16;
  std::int64_t kernel = 3;
  std::int64_t stride = 1;
  std::int64_t padding = 1;
  bool max_pool = false;
};

/// `blocks` repetitions of a template; the first takes the template's in_ch and
/// stride, the rest chain out_ch → out_ch at stride 1.
struct StageSpec {
  int blocks = 1;
  BlockSpec block;
};

struct ArchSpec {
  std::string name;
  StemSpec stem;
  std::vector<StageSpec> stages;
  std::int64_t num_classes = 10;
  Shape input_shape{3, 32, 32};  // C, H, W

  /// Concrete per-block specs with attention applied and projections derived.
  std::vector<BlockSpec> expand(AttentionKind attention, const BridgeSourceConfig& sources) const;
  void validate() const;
};

ArchSpec resnet20();
ArchSpec resnet50();
ArchSpec resnet101();
/// Built-in name, or a path to a JSON architecture document.
ArchSpec resolve_arch(const std::string& name_or_path);
ArchSpec arch_from_json(const std::string& text);
std::string arch_to_json(const ArchSpec& arch);

template <typename T>
struct ConvBn {
  Tensor<T> weight;
  Tensor<T> gamma;
  Tensor<T> beta;
  BatchNormState<T> bn;
  std::int64_t stride = 1;
  std::int64_t padding = 0;

  static ConvBn create(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel, std::int64_t stride, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
};

/// Attention internals of one block forward, kept for inspection.
template <typename T>
struct BlockTrace {
  int block = 0;
  std::vector<Tensor<T>> features;  // inputs to the attention layer, ascending conv index
  std::vector<Tensor<T>> squeezed;  // per branch (one for squeeze-excitation)
  Tensor<T> weights;
};

enum class ParamRole { weight, bias, norm, buffer };

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  ParamRole role = ParamRole::weight;

  bool trainable() const { return role != ParamRole::buffer; }
  bool decayed() const { return role == ParamRole::weight; }
};

template <typename T>
class Block {
 public:
  static Block build(const BlockSpec& spec, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Mode mode, BlockTrace<T>* trace = nullptr);
  void collect(const std::string& prefix, std::vector<Parameter<T>>& out);

  const BlockSpec& spec() const { return spec_; }
  std::vector<ConvBn<T>>& convs() { return convs_; }
  std::optional<ConvBn<T>>& shortcut() { return shortcut_; }
  std::optional<SqueezeExcite<T>>& se() { return se_; }
  std::optional<BridgeAttentionModule<T>>& ba() { return ba_; }

 private:
  BlockSpec spec_;
  std::vector<ConvBn<T>> convs_;
  std::optional<ConvBn<T>> shortcut_;
  std::optional<SqueezeExcite<T>> se_;
  std::optional<BridgeAttentionModule<T>> ba_;
};

template <typename T>
class Network {
 public:
  static Network build(const ArchSpec& arch, AttentionKind attention, const BridgeSourceConfig& sources,
                       std::uint64_t seed);

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  /// B×C×H×W → B×num_classes. Traces, when requested, get one entry per attention block.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, std::vector<BlockTrace<T>>* traces = nullptr);

  const ArchSpec& arch() const { return arch_; }
  AttentionKind attention() const { return attention_; }
  const BridgeSourceConfig& bridge_sources() const { return sources_; }
  std::vector<Block<T>>& blocks() { return blocks_; }
  const std::vector<Parameter<T>>& parameters() const { return registry_; }
  Tensor<T>& fc_weight() { return fc_weight_; }
  Tensor<T>& fc_bias() { return fc_bias_; }
  std::size_t attention_block_count() const;

  void zero_grad();

 private:
  Network() = default;
  void register_parameters();

  ArchSpec arch_;
  AttentionKind attention_ = AttentionKind::none;
  BridgeSourceConfig sources_;
  ConvBn<T> stem_;
  std::vector<Block<T>> blocks_;
  Tensor<T> fc_weight_;  // features × classes
  Tensor<T> fc_bias_;
  std::vector<Parameter<T>> registry_;
};

}  // namespace banet
