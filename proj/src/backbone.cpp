// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "banet/backbone.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace banet {

using json = nlohmann::json;

std::string_view to_string(BlockKind kind) { return kind == BlockKind::bottleneck ? "bottleneck" : "basic"; }

std::string_view to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::se:
      return "se";
    case AttentionKind::ba:
      return "ba";
    default:
      return "none";
  }
}

BlockKind parse_block_kind(std::string_view text) {
  if (text == "basic") return BlockKind::basic;
  if (text == "bottleneck") return BlockKind::bottleneck;
  throw ConfigurationError("unknown block kind '" + std::string(text) + "'");
}

AttentionKind parse_attention_kind(std::string_view text) {
  if (text == "none") return AttentionKind::none;
  if (text == "se") return AttentionKind::se;
  if (text == "ba") return AttentionKind::ba;
  throw ConfigurationError("unknown attention kind '" + std::string(text) + "'");
}

BridgeSourceConfig BridgeSourceConfig::parse(std::string_view text) {
  BridgeSourceConfig cfg;
  if (text.empty() || text == "all") return cfg;
  cfg.all = false;
  auto add = [&](int index) {
    if (std::find(cfg.sources.begin(), cfg.sources.end(), index) == cfg.sources.end()) cfg.sources.push_back(index);
  };
  std::string token;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, token, ',')) {
    if (token.rfind("conv", 0) != 0 || token.size() == 4) {
      throw ConfigurationError("bad bridge source '" + token + "'");
    }
    std::stringstream parts(token.substr(4));
    std::string digit;
    while (std::getline(parts, digit, '&')) {
      if (digit.empty() || !std::all_of(digit.begin(), digit.end(), ::isdigit)) {
        throw ConfigurationError("bad bridge source '" + token + "'");
      }
      add(std::stoi(digit));
    }
  }
  std::sort(cfg.sources.begin(), cfg.sources.end());
  return cfg;
}

std::string BridgeSourceConfig::label() const {
  if (all) return "all";
  if (sources.empty()) return "none";
  std::string out = "conv";
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (i) out += '&';
    out += std::to_string(sources[i]);
  }
  return out;
}

std::vector<int> BridgeSourceConfig::resolve(int conv_count) const {
  std::vector<int> out;
  if (all) {
    for (int i = 1; i < conv_count; ++i) out.push_back(i);
    return out;
  }
  for (const int s : sources) {
    if (s < 1 || s >= conv_count) {
      throw ConfigurationError("bridge source conv" + std::to_string(s) + " is not a layer before the attention " +
                               "layer of a " + std::to_string(conv_count) + "-conv block");
    }
    out.push_back(s);
  }
  return out;
}

void BlockSpec::validate() const {
  if (in_ch <= 0 || mid_ch <= 0 || out_ch <= 0) throw ConfigurationError("block channels must be positive");
  if (stride != 1 && stride != 2) throw ConfigurationError("block stride must be 1 or 2");
  if (downsample != needs_projection()) {
    throw ConfigurationError("block " + std::to_string(in_ch) + "->" + std::to_string(out_ch) + " stride " +
                             std::to_string(stride) + (downsample ? " must not" : " must") +
                             " have a projection shortcut");
  }
  if (attention != AttentionKind::none && (reduction <= 0 || out_ch % reduction != 0)) {
    throw ConfigurationError("reduction " + std::to_string(reduction) + " does not divide " +
                             std::to_string(out_ch) + " channels");
  }
  if (attention == AttentionKind::ba) bridge_sources.resolve(conv_count());
}

std::vector<BlockSpec> ArchSpec::expand(AttentionKind attention, const BridgeSourceConfig& sources) const {
  validate();
  std::vector<BlockSpec> out;
  for (const auto& stage : stages) {
    for (int i = 0; i < stage.blocks; ++i) {
      BlockSpec b = stage.block;
      if (i > 0) {
        b.in_ch = b.out_ch;
        b.stride = 1;
      }
      b.attention = attention;
      b.bridge_sources = sources;
      b.downsample = b.needs_projection();
      b.validate();
      out.push_back(b);
    }
  }
  return out;
}

void ArchSpec::validate() const {
  if (input_shape.size() != 3) throw ConfigurationError("input_shape must be [C, H, W]");
  if (num_classes <= 0) throw ConfigurationError("num_classes must be positive");
  if (stages.empty()) throw ConfigurationError("architecture '" + name + "' has no stages");
  std::int64_t channels = stem.out_ch;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& stage = stages[s];
    if (stage.blocks < 1) throw ConfigurationError("stage " + std::to_string(s) + " has no blocks");
    if (stage.block.in_ch != channels) {
      throw ConfigurationError("stage " + std::to_string(s) + " expects " + std::to_string(stage.block.in_ch) +
                               " input channels but receives " + std::to_string(channels));
    }
    channels = stage.block.out_ch;
  }
}

namespace {

StageSpec stage(int blocks, BlockKind kind, std::int64_t in, std::int64_t mid, std::int64_t out,
                std::int64_t stride) {
  StageSpec s;
  s.blocks = blocks;
  s.block.kind = kind;
  s.block.in_ch = in;
  s.block.mid_ch = mid;
  s.block.out_ch = out;
  s.block.stride = stride;
  return s;
}

ArchSpec imagenet_resnet(std::string name, std::vector<int> depths) {
  ArchSpec a;
  a.name = std::move(name);
  a.stem = StemSpec{64, 7, 2, 3, true};
  const std::int64_t mids[] = {64, 128, 256, 512};
  std::int64_t in = 64;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    a.stages.push_back(stage(depths[i], BlockKind::bottleneck, in, mids[i], mids[i] * 4, i == 0 ? 1 : 2));
    in = mids[i] * 4;
  }
  a.num_classes = 1000;
  a.input_shape = {3, 224, 224};
  return a;
}

}  // namespace

ArchSpec resnet20() {
  ArchSpec a;
  a.name = "resnet20";
  a.stem = StemSpec{16, 3, 1, 1, false};
  a.stages = {stage(3, BlockKind::basic, 16, 16, 16, 1), stage(3, BlockKind::basic, 16, 32, 32, 2),
              stage(3, BlockKind::basic, 32, 64, 64, 2)};
  a.num_classes = 10;
  a.input_shape = {3, 32, 32};
  return a;
}

ArchSpec resnet50() { return imagenet_resnet("resnet50", {3, 4, 6, 3}); }
ArchSpec resnet101() { return imagenet_resnet("resnet101", {3, 4, 23, 3}); }

ArchSpec resolve_arch(const std::string& name_or_path) {
  if (name_or_path == "resnet20") return resnet20();
  if (name_or_path == "resnet50") return resnet50();
  if (name_or_path == "resnet101") return resnet101();
  if (std::filesystem::is_regular_file(name_or_path)) {
    std::ifstream in(name_or_path);
    std::stringstream buf;
    buf << in.rdbuf();
    return arch_from_json(buf.str());
  }
  throw ConfigurationError("unknown architecture '" + name_or_path + "'");
}

ArchSpec arch_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    ArchSpec a;
    a.name = doc.at("name").get<std::string>();
    const auto& stem = doc.at("stem");
    a.stem.out_ch = stem.at("out_ch").get<std::int64_t>();
    a.stem.kernel = stem.at("kernel").get<std::int64_t>();
    a.stem.stride = stem.at("stride").get<std::int64_t>();
    a.stem.padding = stem.at("padding").get<std::int64_t>();
    a.stem.max_pool = stem.value("max_pool", false);
    for (const auto& st : doc.at("stages")) {
      StageSpec s;
      s.blocks = st.at("blocks").get<int>();
      const auto& b = st.at("block");
      s.block.kind = parse_block_kind(b.at("kind").get<std::string>());
      s.block.in_ch = b.at("in_ch").get<std::int64_t>();
      s.block.mid_ch = b.at("mid_ch").get<std::int64_t>();
      s.block.out_ch = b.at("out_ch").get<std::int64_t>();
      s.block.stride = b.value("stride", std::int64_t{1});
      s.block.attention = parse_attention_kind(b.value("attention", std::string("none")));
      s.block.bridge_sources = BridgeSourceConfig::parse(b.value("bridge_sources", std::string("all")));
      s.block.downsample = b.value("downsample", false);
      s.block.reduction = b.value("reduction", kDefaultReduction);
      a.stages.push_back(s);
    }
    a.num_classes = doc.at("num_classes").get<std::int64_t>();
    a.input_shape = doc.at("input_shape").get<Shape>();
    a.validate();
    return a;
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("architecture JSON: ") + e.what());
  }
}

std::string arch_to_json(const ArchSpec& a) {
  json doc;
  doc["name"] = a.name;
  doc["stem"] = {{"out_ch", a.stem.out_ch},
                 {"kernel", a.stem.kernel},
                 {"stride", a.stem.stride},
                 {"padding", a.stem.padding},
                 {"max_pool", a.stem.max_pool}};
  doc["stages"] = json::array();
  for (const auto& s : a.stages) {
    doc["stages"].push_back({{"blocks", s.blocks},
                             {"block",
                              {{"kind", to_string(s.block.kind)},
                               {"in_ch", s.block.in_ch},
                               {"mid_ch", s.block.mid_ch},
                               {"out_ch", s.block.out_ch},
                               {"stride", s.block.stride},
                               {"attention", to_string(s.block.attention)},
                               {"bridge_sources", s.block.bridge_sources.label()},
                               {"downsample", s.block.downsample},
                               {"reduction", s.block.reduction}}}});
  }
  doc["num_classes"] = a.num_classes;
  doc["input_shape"] = a.input_shape;
  return doc.dump(2);
}

template <typename T>
ConvBn<T> ConvBn<T>::create(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel, std::int64_t stride,
                            Rng& rng) {
  ConvBn c;
  c.weight = kaiming_uniform<T>({out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel, rng);
  c.gamma = Tensor<T>::ones({out_ch});
  c.beta = Tensor<T>::zeros({out_ch});
  c.bn = BatchNormState<T>(out_ch);
  c.stride = stride;
  c.padding = kernel / 2;
  return c;
}

template <typename T>
Tensor<T> ConvBn<T>::forward(const Tensor<T>& x, Mode mode) {
  return batchnorm(conv2d(x, weight, stride, padding), gamma, beta, bn, mode);
}

template <typename T>
Block<T> Block<T>::build(const BlockSpec& spec, Rng& rng) {
  spec.validate();
  Block b;
  b.spec_ = spec;
  if (spec.kind == BlockKind::bottleneck) {
    b.convs_.push_back(ConvBn<T>::create(spec.in_ch, spec.mid_ch, 1, 1, rng));
    b.convs_.push_back(ConvBn<T>::create(spec.mid_ch, spec.mid_ch, 3, spec.stride, rng));
    b.convs_.push_back(ConvBn<T>::create(spec.mid_ch, spec.out_ch, 1, 1, rng));
  } else {
    b.convs_.push_back(ConvBn<T>::create(spec.in_ch, spec.mid_ch, 3, spec.stride, rng));
    b.convs_.push_back(ConvBn<T>::create(spec.mid_ch, spec.out_ch, 3, 1, rng));
  }
  if (spec.downsample) b.shortcut_ = ConvBn<T>::create(spec.in_ch, spec.out_ch, 1, spec.stride, rng);
  if (spec.attention == AttentionKind::se) {
    b.se_ = SqueezeExcite<T>::create(spec.out_ch, spec.reduction, rng);
  } else if (spec.attention == AttentionKind::ba) {
    auto sources = spec.bridge_sources.resolve(spec.conv_count());
    std::vector<std::int64_t> channels;
    for (const int s : sources) channels.push_back(b.convs_[s - 1].weight.dim(0));
    sources.push_back(spec.conv_count());
    channels.push_back(spec.out_ch);
    b.ba_ = BridgeAttentionModule<T>::create(sources, channels, spec.out_ch, spec.reduction, rng);
  }
  return b;
}

template <typename T>
Tensor<T> Block<T>::forward(const Tensor<T>& x, Mode mode, BlockTrace<T>* trace) {
  const int n = spec_.conv_count();
  std::vector<Tensor<T>> activations;
  Tensor<T> h = x;
  for (int i = 0; i < n - 1; ++i) {
    h = relu(convs_[i].forward(h, mode));
    activations.push_back(h);
  }
  Tensor<T> y = convs_[n - 1].forward(h, mode);

  if (se_) {
    auto z = se_integrate(y, *se_);
    auto w = se_generate(z, *se_);
    if (trace) {
      trace->features = {y};
      trace->squeezed = {z};
      trace->weights = w;
    }
    y = apply_attention(y, w);
  } else if (ba_) {
    std::vector<Tensor<T>> features;
    for (const auto& branch : ba_->branches) {
      features.push_back(branch.source == n ? y : activations[branch.source - 1]);
    }
    auto result = ba_forward(features, *ba_, mode);
    if (trace) {
      trace->features = features;
      trace->squeezed = result.squeezed;
      trace->weights = result.weights;
    }
    y = apply_attention(y, result.weights);
  }

  Tensor<T> identity = shortcut_ ? shortcut_->forward(x, mode) : x;
  return relu(add(y, identity));
}

template <typename T>
void Block<T>::collect(const std::string& prefix, std::vector<Parameter<T>>& out) {
  auto conv_bn = [&out](const std::string& p, ConvBn<T>& c) {
    out.push_back({p + ".weight", c.weight, ParamRole::weight});
    out.push_back({p + ".bn.gamma", c.gamma, ParamRole::norm});
    out.push_back({p + ".bn.beta", c.beta, ParamRole::norm});
    out.push_back({p + ".bn.running_mean", c.bn.running_mean, ParamRole::buffer});
    out.push_back({p + ".bn.running_var", c.bn.running_var, ParamRole::buffer});
  };
  for (std::size_t i = 0; i < convs_.size(); ++i) conv_bn(prefix + ".conv" + std::to_string(i + 1), convs_[i]);
  if (shortcut_) conv_bn(prefix + ".shortcut", *shortcut_);
  if (se_) {
    out.push_back({prefix + ".se.w1", se_->w1, ParamRole::weight});
    out.push_back({prefix + ".se.w2", se_->w2, ParamRole::weight});
    out.push_back({prefix + ".se.b2", se_->b2, ParamRole::bias});
  }
  if (ba_) {
    for (auto& br : ba_->branches) {
      const std::string p = prefix + ".ba.branch" + std::to_string(br.source);
      out.push_back({p + ".squeeze", br.squeeze, ParamRole::weight});
      out.push_back({p + ".bn.gamma", br.gamma, ParamRole::norm});
      out.push_back({p + ".bn.beta", br.beta, ParamRole::norm});
      out.push_back({p + ".bn.running_mean", br.bn.running_mean, ParamRole::buffer});
      out.push_back({p + ".bn.running_var", br.bn.running_var, ParamRole::buffer});
    }
    out.push_back({prefix + ".ba.w2", ba_->w2, ParamRole::weight});
    out.push_back({prefix + ".ba.b2", ba_->b2, ParamRole::bias});
  }
}

template <typename T>
Network<T> Network<T>::build(const ArchSpec& arch, AttentionKind attention, const BridgeSourceConfig& sources,
                             std::uint64_t seed) {
  const auto specs = arch.expand(attention, sources);
  Rng rng(seed);
  Network net;
  net.arch_ = arch;
  net.attention_ = attention;
  net.sources_ = sources;
  net.stem_ = ConvBn<T>::create(arch.input_shape[0], arch.stem.out_ch, arch.stem.kernel, arch.stem.stride, rng);
  net.stem_.padding = arch.stem.padding;
  for (const auto& spec : specs) net.blocks_.push_back(Block<T>::build(spec, rng));
  const std::int64_t features = specs.back().out_ch;
  net.fc_weight_ = kaiming_uniform<T>({features, arch.num_classes}, features, rng);
  net.fc_bias_ = Tensor<T>::zeros({arch.num_classes});
  net.register_parameters();
  return net;
}

template <typename T>
void Network<T>::register_parameters() {
  registry_.clear();
  registry_.push_back({"stem.conv.weight", stem_.weight, ParamRole::weight});
  registry_.push_back({"stem.bn.gamma", stem_.gamma, ParamRole::norm});
  registry_.push_back({"stem.bn.beta", stem_.beta, ParamRole::norm});
  registry_.push_back({"stem.bn.running_mean", stem_.bn.running_mean, ParamRole::buffer});
  registry_.push_back({"stem.bn.running_var", stem_.bn.running_var, ParamRole::buffer});
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("blocks." + std::to_string(i), registry_);
  registry_.push_back({"fc.weight", fc_weight_, ParamRole::weight});
  registry_.push_back({"fc.bias", fc_bias_, ParamRole::bias});
  for (auto& p : registry_) {
    if (p.trainable()) p.tensor.set_requires_grad(true);
  }
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, Mode mode, std::vector<BlockTrace<T>>* traces) {
  const auto& in = arch_.input_shape;
  if (x.rank() != 4 || x.dim(1) != in[0] || x.dim(2) != in[1] || x.dim(3) != in[2]) {
    throw DimensionError("network '" + arch_.name + "' expects B x " + std::to_string(in[0]) + " x " +
                         std::to_string(in[1]) + " x " + std::to_string(in[2]) + " input, got " +
                         to_string(x.shape()));
  }
  Tensor<T> h = relu(stem_.forward(x, mode));
  if (arch_.stem.max_pool) h = max_pool2d(h, 3, 2, 1);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const bool attended = blocks_[i].se() || blocks_[i].ba();
    if (traces && attended) {
      BlockTrace<T> trace;
      trace.block = static_cast<int>(i);
      h = blocks_[i].forward(h, mode, &trace);
      traces->push_back(std::move(trace));
    } else {
      h = blocks_[i].forward(h, mode);
    }
  }
  return add_bias(matmul(global_avg_pool(h), fc_weight_), fc_bias_);
}

template <typename T>
std::size_t Network<T>::attention_block_count() const {
  return static_cast<std::size_t>(std::count_if(blocks_.begin(), blocks_.end(), [](const Block<T>& b) {
    return b.spec().attention != AttentionKind::none;
  }));
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto& p : registry_) {
    if (p.trainable()) p.tensor.zero_grad();
  }
}

template struct ConvBn<float>;
template struct ConvBn<double>;
template class Block<float>;
template class Block<double>;
template class Network<float>;
template class Network<double>;

}  // namespace banet
