// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "banet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "banet/checkpoint.hpp"
#include "json.hpp"

namespace banet {

using json = nlohmann::json;

std::string_view to_string(Precision p) { return p == Precision::float64 ? "float64" : "float32"; }

Precision parse_precision(std::string_view text) {
  if (text == "float32" || text == "f32" || text == "32") return Precision::float32;
  if (text == "float64" || text == "f64" || text == "64") return Precision::float64;
  throw ConfigurationError("unknown precision '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(lr0 > 0) || momentum < 0 || momentum >= 1 || weight_decay < 0) {
    throw ConfigurationError("train config: lr0 must be positive, momentum in [0, 1), weight_decay >= 0");
  }
  if (batch_size < 2) throw ConfigurationError("train config: batch_size must be at least 2");
  if (epochs < 1) throw ConfigurationError("train config: epochs must be positive");
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig cfg;
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw ConfigurationError("train config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (key == "lr0") {
        cfg.lr0 = value.get<double>();
      } else if (key == "momentum") {
        cfg.momentum = value.get<double>();
      } else if (key == "weight_decay") {
        cfg.weight_decay = value.get<double>();
      } else if (key == "batch_size") {
        cfg.batch_size = value.get<int>();
      } else if (key == "epochs") {
        cfg.epochs = value.get<int>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "precision") {
        cfg.precision = parse_precision(value.get<std::string>());
      } else {
        throw ConfigurationError("train config: unknown field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("train config JSON: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string TrainConfig::to_json() const {
  json doc = {{"lr0", lr0},       {"momentum", momentum}, {"weight_decay", weight_decay}, {"batch_size", batch_size},
              {"epochs", epochs}, {"seed", seed},         {"precision", to_string(precision)}};
  return doc.dump(2);
}

double cosine_lr(int epoch, int total_epochs, double lr0) {
  if (total_epochs <= 0 || epoch < 0 || epoch > total_epochs) {
    throw RangeError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) +
                     "]");
  }
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * epoch / total_epochs));
}

template <typename T>
SgdState<T> SgdState<T>::zeros_like(const std::vector<Parameter<T>>& params) {
  SgdState s;
  for (const auto& p : params) {
    if (p.trainable()) s.velocity.push_back(Tensor<T>::zeros(p.tensor.shape()));
  }
  return s;
}

template <typename T>
void sgd_step(const std::vector<Parameter<T>>& params, SgdState<T>& state, const TrainConfig& cfg, double lr) {
  std::size_t slot = 0;
  const T mu = static_cast<T>(cfg.momentum);
  const T step = static_cast<T>(lr);
  for (const auto& p : params) {
    if (!p.trainable()) continue;
    if (slot >= state.velocity.size()) throw RegistryError("sgd_step: no velocity for '" + p.name + "'");
    auto& v = state.velocity[slot++];
    auto tensor = p.tensor;
    if (v.shape() != tensor.shape()) {
      throw RegistryError("sgd_step: velocity shape " + to_string(v.shape()) + " does not match '" + p.name + "' " +
                          to_string(tensor.shape()));
    }
    if (tensor.grad().size() != tensor.numel()) throw RegistryError("sgd_step: '" + p.name + "' has no gradient");
    const T wd = p.decayed() ? static_cast<T>(cfg.weight_decay) : T(0);
    auto w = tensor.data();
    auto g = tensor.grad();
    auto vel = v.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      vel[i] = mu * vel[i] + (g[i] + wd * w[i]);
      w[i] -= step * vel[i];
    }
  }
  if (slot != state.velocity.size()) {
    throw RegistryError("sgd_step: " + std::to_string(state.velocity.size()) + " velocities for " +
                        std::to_string(slot) + " parameters");
  }
}

std::string History::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,lr,train_loss,test_top1,test_top5\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.test_top1 << ',' << e.test_top5 << '\n';
  }
  return os.str();
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
TopKCounts topk_counts(std::span<const T> logits, std::int64_t classes, std::span<const int> labels) {
  if (static_cast<std::int64_t>(logits.size()) != classes * static_cast<std::int64_t>(labels.size())) {
    throw DimensionError("topk_counts: " + std::to_string(logits.size()) + " logits for " +
                         std::to_string(labels.size()) + " labels of " + std::to_string(classes) + " classes");
  }
  TopKCounts counts;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const T* row = logits.data() + b * classes;
    const int label = labels[b];
    const T target = row[label];
    std::int64_t rank = 0;
    for (std::int64_t k = 0; k < classes; ++k) {
      if (row[k] > target || (row[k] == target && k < label)) ++rank;
    }
    counts.top1 += rank < 1;
    counts.top5 += rank < 5;
    ++counts.total;
  }
  return counts;
}

template <typename T>
Accuracy evaluate(Network<T>& net, const Dataset& data, int batch) {
  NoGradGuard no_grad;
  TopKCounts total;
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch));
    indices.resize(end - start);
    std::iota(indices.begin(), indices.end(), start);
    const auto logits = net.forward(make_batch<T>(data, indices), Mode::eval);
    const auto c = topk_counts<T>(logits.data(), logits.dim(1),
                                  std::span<const int>(data.labels).subspan(start, end - start));
    total.top1 += c.top1;
    total.top5 += c.top5;
    total.total += c.total;
  }
  if (total.total == 0) return {};
  return {static_cast<double>(total.top1) / total.total, static_cast<double>(total.top5) / total.total};
}

template <typename T>
History train(Network<T>& net, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
              const TrainOptions& options) {
  cfg.validate();
  train_set.validate();
  if (train_set.size() < 2) throw SamplingError("train: need at least two training samples");
  History history;
  std::mt19937_64 rng(cfg.seed);
  SgdState<T> sgd = SgdState<T>::zeros_like(net.parameters());
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.epochs, cfg.effective_lr0());
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      if (end - start < 2) break;  // train-mode batch norm needs two samples
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<AugmentParams> aug;
      if (options.augment) {
        for (std::size_t i = 0; i < idx.size(); ++i) aug.push_back(draw_augment(rng));
      }
      std::uint64_t h = fnv1a(idx.data(), idx.size_bytes());
      for (const auto& a : aug) {
        const int packed[3] = {a.offset_y, a.offset_x, a.flip ? 1 : 0};
        h = fnv1a(packed, sizeof(packed), h);
      }
      history.batch_hashes.push_back(h);

      std::vector<int> labels;
      for (const auto i : idx) labels.push_back(train_set.labels[i]);
      const auto x = make_batch<T>(train_set, idx, options.augment ? &aug : nullptr);
      const auto loss = cross_entropy(net.forward(x, Mode::train), labels);
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) {
        reset_tape<T>();
        throw NumericError("non-finite loss " + std::to_string(value) + " at epoch " + std::to_string(epoch + 1) +
                           ", step " + std::to_string(start / batch + 1));
      }
      net.zero_grad();
      backward(loss);
      sgd_step(net.parameters(), sgd, cfg, lr);
      reset_tape<T>();
      history.step_losses.push_back(value);
      loss_sum += value * static_cast<double>(idx.size());
      seen += idx.size();
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    if (test_set.size() > 0) {
      const auto acc = evaluate(net, test_set, options.eval_batch);
      rec.test_top1 = acc.top1;
      rec.test_top5 = acc.top5;
    }
    history.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  if (!options.checkpoint.empty()) save_checkpoint(net, options.checkpoint);
  return history;
}

#define BANET_INSTANTIATE_TRAINING(T)                                                                   \
  template struct SgdState<T>;                                                                          \
  template void sgd_step(const std::vector<Parameter<T>>&, SgdState<T>&, const TrainConfig&, double);   \
  template TopKCounts topk_counts(std::span<const T>, std::int64_t, std::span<const int>);              \
  template Accuracy evaluate(Network<T>&, const Dataset&, int);                                         \
  template History train(Network<T>&, const Dataset&, const Dataset&, const TrainConfig&, const TrainOptions&);

BANET_INSTANTIATE_TRAINING(float)
BANET_INSTANTIATE_TRAINING(double)

}  // namespace banet
