// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

// Inspection of trained attention: per-class mean weights and random-forest
// importance of each bridged branch's squeezed features for the final weights.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "banet/backbone.hpp"
#include "banet/data.hpp"

namespace banet {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  void append_rows(const Matrix& other);
};

/// Attention internals of one block over a set of samples.
struct AttentionTrace {
  int block = 0;
  std::vector<int> sources;       // conv index feeding each branch
  std::vector<Matrix> squeezed;   // per branch, N × hidden
  Matrix weights;                 // N × channels
  std::vector<int> labels;        // N
};

template <typename T>
std::vector<AttentionTrace> capture_traces(Network<T>& net, const Dataset& data, const std::vector<int>& classes = {},
                                           int batch = 250);

struct ClassMeanRow {
  int label = 0;
  int block = 0;
  int channel = 0;
  double mean_weight = 0;
};

/// Channel-wise mean of ω per class and block. Requested classes without samples are skipped with a warning.
std::vector<ClassMeanRow> class_mean_weights(const std::vector<AttentionTrace>& traces,
                                             const std::vector<int>& classes = {});
/// class,block,channel,mean_weight
std::string class_means_csv(const std::vector<ClassMeanRow>& rows);

struct ClassSpread {
  int label = 0;
  int block = 0;
  double variance = 0;  // across channels of the class-mean curve
};
std::vector<ClassSpread> class_mean_spread(const std::vector<ClassMeanRow>& rows);

struct ForestConfig {
  int trees = 50;
  int max_depth = 8;
  int min_leaf = 5;
  bool bootstrap = true;
  int max_features = 0;  // 0 → ceil(sqrt(D))
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0;
  int left = -1;
  int right = -1;
  std::size_t samples = 0;
  double impurity = 0;   // sum of squared deviations of the standardized targets
  double reduction = 0;  // impurity(node) − impurity(left) − impurity(right)
  std::vector<double> value;  // mean target, original scale

  bool leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // root at 0
};

/// Multi-output regression forest. Targets are standardized per column so
/// every output contributes equally to the split criterion.
struct RegressionForest {
  ForestConfig config;
  std::size_t features = 0;
  std::size_t outputs = 0;
  std::vector<RegressionTree> trees;
  bool degenerate = false;  // all targets constant

  std::vector<double> predict(const double* row) const;
};

RegressionForest fit_forest(const Matrix& features, const Matrix& targets, const ForestConfig& config,
                            std::uint64_t seed);

struct Importance {
  std::vector<double> scores;  // sums to 1 unless degenerate
  bool degenerate = false;
};

/// Total weighted impurity reduction per feature over all trees, normalized.
Importance gini_importance(const RegressionForest& forest);

struct BlockImportance {
  int block = 0;
  std::vector<int> sources;
  std::vector<double> shares;
  bool degenerate = false;
};

struct ImportanceReport {
  std::vector<BlockImportance> blocks;

  /// block,branch,share
  std::string to_csv() const;
};

/// Per block, fits ω on the concatenated squeezed features and sums the
/// importances within each branch.
ImportanceReport branch_importance(const std::vector<AttentionTrace>& traces, const ForestConfig& config = {},
                                   std::uint64_t seed = 0);

}  // namespace banet
