// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "banet/backbone.hpp"
#include "banet/data.hpp"

namespace banet {

enum class Precision { float32, float64 };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

struct TrainConfig {
  double lr0 = 0.1;  // for a batch of 256; scaled linearly to batch_size
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 64;
  int epochs = 30;
  std::uint64_t seed = 0;
  Precision precision = Precision::float32;

  double effective_lr0() const { return lr0 * batch_size / 256.0; }
  void validate() const;

  /// Accepts a JSON object whose keys are a subset of the fields above.
  static TrainConfig from_json(const std::string& text);
  std::string to_json() const;
};

/// 0.5·lr0·(1 + cos(π·t/T)) for 0 ≤ t ≤ T.
double cosine_lr(int epoch, int total_epochs, double lr0);

template <typename T>
struct SgdState {
  std::vector<Tensor<T>> velocity;  // one per trainable parameter, registry order

  static SgdState zeros_like(const std::vector<Parameter<T>>& params);
};

/// g' = g + wd·p (weights only), v ← μ·v + g', p ← p − lr·v.
template <typename T>
void sgd_step(const std::vector<Parameter<T>>& params, SgdState<T>& state, const TrainConfig& cfg, double lr);

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double test_top1 = 0;
  double test_top5 = 0;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  std::vector<std::uint64_t> batch_hashes;  // sample order and augmentation of every step

  /// epoch,lr,train_loss,test_top1,test_top5
  std::string to_csv() const;
};

struct TrainOptions {
  bool augment = true;
  std::filesystem::path checkpoint;  // written after the last epoch when set
  int eval_batch = 250;
  std::function<void(const EpochRecord&)> on_epoch;
};

template <typename T>
History train(Network<T>& net, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
              const TrainOptions& options = {});

struct Accuracy {
  double top1 = 0;
  double top5 = 0;
};

struct TopKCounts {
  std::size_t top1 = 0;
  std::size_t top5 = 0;
  std::size_t total = 0;
};

/// Counts samples whose label ranks among the 1 / 5 largest logits. Ties go to the lower class index.
template <typename T>
TopKCounts topk_counts(std::span<const T> logits, std::int64_t classes, std::span<const int> labels);

template <typename T>
Accuracy evaluate(Network<T>& net, const Dataset& data, int batch = 250);

/// FNV-1a over a byte range, chained from `seed`.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace banet
