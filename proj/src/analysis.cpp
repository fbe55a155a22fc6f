// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "banet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace banet {

void Matrix::append_rows(const Matrix& other) {
  if (rows == 0 && values.empty()) cols = other.cols;
  if (other.cols != cols) throw DimensionError("Matrix::append_rows: column mismatch");
  values.insert(values.end(), other.values.begin(), other.values.end());
  rows += other.rows;
}

namespace {

template <typename T>
Matrix to_matrix(const Tensor<T>& t) {
  Matrix m(static_cast<std::size_t>(t.dim(0)), static_cast<std::size_t>(t.dim(1)));
  std::copy(t.data().begin(), t.data().end(), m.values.begin());
  return m;
}

}  // namespace

template <typename T>
std::vector<AttentionTrace> capture_traces(Network<T>& net, const Dataset& data, const std::vector<int>& classes,
                                           int batch) {
  if (net.attention_block_count() == 0) {
    throw ConfigurationError("capture_traces: network has no attention blocks");
  }
  const Dataset subset = classes.empty() ? data : data.filter(classes);
  NoGradGuard no_grad;
  std::vector<AttentionTrace> traces;
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < subset.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(subset.size(), start + static_cast<std::size_t>(batch));
    indices.resize(end - start);
    std::iota(indices.begin(), indices.end(), start);
    std::vector<BlockTrace<T>> block_traces;
    net.forward(make_batch<T>(subset, indices), Mode::eval, &block_traces);
    if (traces.empty()) {
      for (const auto& bt : block_traces) {
        AttentionTrace t;
        t.block = bt.block;
        auto& block = net.blocks()[bt.block];
        if (block.ba()) {
          for (const auto& br : block.ba()->branches) t.sources.push_back(br.source);
        } else {
          t.sources.push_back(block.spec().conv_count());
        }
        t.squeezed.resize(bt.squeezed.size());
        traces.push_back(std::move(t));
      }
    }
    for (std::size_t b = 0; b < block_traces.size(); ++b) {
      auto& t = traces[b];
      for (std::size_t i = 0; i < block_traces[b].squeezed.size(); ++i) {
        t.squeezed[i].append_rows(to_matrix(block_traces[b].squeezed[i]));
      }
      t.weights.append_rows(to_matrix(block_traces[b].weights));
      t.labels.insert(t.labels.end(), subset.labels.begin() + start, subset.labels.begin() + end);
    }
  }
  return traces;
}

std::vector<ClassMeanRow> class_mean_weights(const std::vector<AttentionTrace>& traces,
                                             const std::vector<int>& classes) {
  if (traces.empty()) throw ConfigurationError("class_mean_weights: no traces");
  std::vector<int> wanted = classes;
  if (wanted.empty()) {
    wanted = traces.front().labels;
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
  }
  std::vector<ClassMeanRow> rows;
  for (const int label : wanted) {
    bool found = false;
    for (const auto& t : traces) {
      std::vector<double> acc(t.weights.cols, 0.0);
      std::size_t count = 0;
      for (std::size_t r = 0; r < t.weights.rows; ++r) {
        if (t.labels[r] != label) continue;
        for (std::size_t c = 0; c < t.weights.cols; ++c) acc[c] += t.weights(r, c);
        ++count;
      }
      if (count == 0) continue;
      found = true;
      for (std::size_t c = 0; c < acc.size(); ++c) {
        rows.push_back({label, t.block, static_cast<int>(c), acc[c] / static_cast<double>(count)});
      }
    }
    if (!found) std::cerr << "warning: class " << label << " has no samples, skipped\n";
  }
  return rows;
}

std::string class_means_csv(const std::vector<ClassMeanRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "class,block,channel,mean_weight\n";
  for (const auto& r : rows) os << r.label << ',' << r.block << ',' << r.channel << ',' << r.mean_weight << '\n';
  return os.str();
}

std::vector<ClassSpread> class_mean_spread(const std::vector<ClassMeanRow>& rows) {
  std::map<std::pair<int, int>, std::vector<double>> curves;
  for (const auto& r : rows) curves[{r.label, r.block}].push_back(r.mean_weight);
  std::vector<ClassSpread> out;
  for (const auto& [key, values] : curves) {
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double sq = 0;
    for (const double v : values) sq += (v - mean) * (v - mean);
    out.push_back({key.first, key.second, sq / static_cast<double>(values.size())});
  }
  return out;
}

namespace {

struct TreeBuilder {
  const Matrix& x;
  const Matrix& y_original;
  const std::vector<double>& y;  // standardized, N × M
  std::size_t outputs;
  const ForestConfig& cfg;
  std::size_t max_features;
  std::mt19937_64& rng;
  RegressionTree tree;

  double sse(const std::vector<std::size_t>& idx) const {
    double total = 0;
    for (std::size_t m = 0; m < outputs; ++m) {
      double s = 0, sq = 0;
      for (const auto i : idx) {
        const double v = y[i * outputs + m];
        s += v;
        sq += v * v;
      }
      total += sq - s * s / static_cast<double>(idx.size());
    }
    return std::max(0.0, total);
  }

  std::vector<double> mean_value(const std::vector<std::size_t>& idx) const {
    std::vector<double> v(y_original.cols, 0.0);
    for (const auto i : idx) {
      for (std::size_t m = 0; m < v.size(); ++m) v[m] += y_original(i, m);
    }
    for (auto& e : v) e /= static_cast<double>(idx.size());
    return v;
  }

  int grow(std::vector<std::size_t> idx, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode node;
    node.samples = idx.size();
    node.impurity = sse(idx);
    node.value = mean_value(idx);
    const auto min_leaf = static_cast<std::size_t>(std::max(1, cfg.min_leaf));
    if (depth >= cfg.max_depth || idx.size() < 2 * min_leaf || node.impurity <= 1e-12) {
      tree.nodes[id] = std::move(node);
      return id;
    }

    std::vector<std::size_t> candidates(x.cols);
    std::iota(candidates.begin(), candidates.end(), 0);
    for (std::size_t i = 0; i < max_features; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
      std::swap(candidates[i], candidates[pick(rng)]);
    }
    candidates.resize(max_features);

    double total_sq = 0;
    std::vector<double> total_sum(outputs, 0.0);
    for (const auto i : idx) {
      for (std::size_t m = 0; m < outputs; ++m) {
        const double v = y[i * outputs + m];
        total_sum[m] += v;
        total_sq += v * v;
      }
    }

    const double n = static_cast<double>(idx.size());
    double best_gain = 0;
    int best_feature = -1;
    double best_threshold = 0;
    std::vector<std::size_t> sorted = idx;
    std::vector<double> left(outputs);
    for (const auto f : candidates) {
      std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        const double va = x(a, f), vb = x(b, f);
        return va < vb || (va == vb && a < b);
      });
      std::fill(left.begin(), left.end(), 0.0);
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        const std::size_t i = sorted[k];
        for (std::size_t m = 0; m < outputs; ++m) left[m] += y[i * outputs + m];
        const std::size_t nl = k + 1, nr = sorted.size() - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double xa = x(i, f), xb = x(sorted[k + 1], f);
        if (!(xa < xb)) continue;
        double explained = 0;
        for (std::size_t m = 0; m < outputs; ++m) {
          const double r = total_sum[m] - left[m];
          explained += left[m] * left[m] / static_cast<double>(nl) + r * r / static_cast<double>(nr);
        }
        double parent = 0;
        for (std::size_t m = 0; m < outputs; ++m) parent += total_sum[m] * total_sum[m] / n;
        const double gain = explained - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (xa + xb);
        }
      }
    }
    (void)total_sq;
    if (best_feature < 0 || best_gain <= 1e-12 * std::max(1.0, node.impurity)) {
      tree.nodes[id] = std::move(node);
      return id;
    }

    std::vector<std::size_t> li, ri;
    for (const auto i : idx) (x(i, best_feature) <= best_threshold ? li : ri).push_back(i);
    node.feature = best_feature;
    node.threshold = best_threshold;
    tree.nodes[id] = node;
    const int l = grow(std::move(li), depth + 1);
    const int r = grow(std::move(ri), depth + 1);
    auto& stored = tree.nodes[id];
    stored.left = l;
    stored.right = r;
    stored.reduction = stored.impurity - tree.nodes[l].impurity - tree.nodes[r].impurity;
    return id;
  }
};

}  // namespace

std::vector<double> RegressionForest::predict(const double* row) const {
  std::vector<double> out(outputs, 0.0);
  for (const auto& t : trees) {
    int id = 0;
    while (!t.nodes[id].leaf()) {
      const auto& n = t.nodes[id];
      id = row[n.feature] <= n.threshold ? n.left : n.right;
    }
    for (std::size_t m = 0; m < outputs; ++m) out[m] += t.nodes[id].value[m];
  }
  for (auto& v : out) v /= static_cast<double>(trees.size());
  return out;
}

RegressionForest fit_forest(const Matrix& features, const Matrix& targets, const ForestConfig& config,
                            std::uint64_t seed) {
  if (features.rows != targets.rows) {
    throw DimensionError("fit_forest: " + std::to_string(features.rows) + " feature rows vs " +
                         std::to_string(targets.rows) + " target rows");
  }
  if (config.trees < 1 || config.max_depth < 0 || config.min_leaf < 1) {
    throw ConfigurationError("fit_forest: invalid forest configuration");
  }
  const std::size_t n = features.rows;
  if (n < 2 * static_cast<std::size_t>(config.min_leaf) || features.cols == 0) {
    throw SamplingError("fit_forest: " + std::to_string(n) + " samples, need at least " +
                        std::to_string(2 * config.min_leaf));
  }

  // Standardize target columns; constant columns carry no signal and are dropped.
  std::vector<std::size_t> live;
  std::vector<double> mean(targets.cols), scale(targets.cols);
  for (std::size_t m = 0; m < targets.cols; ++m) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += targets(i, m);
    mean[m] = s / static_cast<double>(n);
    double sq = 0;
    for (std::size_t i = 0; i < n; ++i) sq += (targets(i, m) - mean[m]) * (targets(i, m) - mean[m]);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    scale[m] = sd;
    if (sd > 1e-12 * std::max(1.0, std::abs(mean[m]))) live.push_back(m);
  }
  std::vector<double> y(n * live.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < live.size(); ++k) {
      const auto m = live[k];
      y[i * live.size() + k] = (targets(i, m) - mean[m]) / scale[m];
    }
  }

  RegressionForest forest;
  forest.config = config;
  forest.features = features.cols;
  forest.outputs = targets.cols;
  forest.degenerate = live.empty();
  forest.trees.resize(static_cast<std::size_t>(config.trees));
  const std::size_t max_features =
      config.max_features > 0
          ? std::min<std::size_t>(static_cast<std::size_t>(config.max_features), features.cols)
          : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(features.cols))));

#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < config.trees; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(t)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> idx(n);
    if (config.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& i : idx) i = pick(rng);
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    TreeBuilder builder{features, targets, y, live.size(), config, max_features, rng, {}};
    if (forest.degenerate) {
      TreeNode root;
      root.samples = n;
      root.value = builder.mean_value(idx);
      builder.tree.nodes.push_back(root);
    } else {
      builder.grow(std::move(idx), 0);
    }
    forest.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
  }
  return forest;
}

Importance gini_importance(const RegressionForest& forest) {
  if (forest.trees.empty()) throw ConfigurationError("gini_importance: empty forest");
  Importance imp;
  imp.scores.assign(forest.features, 0.0);
  for (const auto& t : forest.trees) {
    for (const auto& node : t.nodes) {
      if (!node.leaf()) imp.scores[static_cast<std::size_t>(node.feature)] += node.reduction;
    }
  }
  const double total = std::accumulate(imp.scores.begin(), imp.scores.end(), 0.0);
  if (!(total > 0)) {
    std::fill(imp.scores.begin(), imp.scores.end(), 0.0);
    imp.degenerate = true;
    return imp;
  }
  for (auto& s : imp.scores) s /= total;
  return imp;
}

std::string ImportanceReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "block,branch,share\n";
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.shares.size(); ++i) os << b.block << ",S" << b.sources[i] << ',' << b.shares[i] << '\n';
  }
  return os.str();
}

ImportanceReport branch_importance(const std::vector<AttentionTrace>& traces, const ForestConfig& config,
                                   std::uint64_t seed) {
  ImportanceReport report;
  for (const auto& t : traces) {
    if (t.squeezed.size() < 2) {
      throw ConfigurationError("branch_importance: block " + std::to_string(t.block) + " has " +
                               std::to_string(t.squeezed.size()) + " branch(es), need bridged features");
    }
    const std::size_t n = t.weights.rows;
    if (n < 2 * static_cast<std::size_t>(config.min_leaf)) {
      throw SamplingError("branch_importance: block " + std::to_string(t.block) + " has " + std::to_string(n) +
                          " samples");
    }
    std::size_t width = 0;
    for (const auto& s : t.squeezed) {
      if (s.rows != n) throw DimensionError("branch_importance: branch rows disagree with weights");
      width += s.cols;
    }
    Matrix x(n, width);
    std::vector<std::size_t> owner;
    std::size_t offset = 0;
    for (std::size_t b = 0; b < t.squeezed.size(); ++b) {
      const auto& s = t.squeezed[b];
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < s.cols; ++c) x(r, offset + c) = s(r, c);
      }
      owner.insert(owner.end(), s.cols, b);
      offset += s.cols;
    }
    const auto forest = fit_forest(x, t.weights, config, seed + static_cast<std::uint64_t>(t.block));
    const auto imp = gini_importance(forest);
    BlockImportance bi;
    bi.block = t.block;
    bi.sources = t.sources;
    bi.shares.assign(t.squeezed.size(), 0.0);
    for (std::size_t f = 0; f < imp.scores.size(); ++f) bi.shares[owner[f]] += imp.scores[f];
    bi.degenerate = imp.degenerate;
    report.blocks.push_back(std::move(bi));
  }
  return report;
}

template std::vector<AttentionTrace> capture_traces(Network<float>&, const Dataset&, const std::vector<int>&, int);
template std::vector<AttentionTrace> capture_traces(Network<double>&, const Dataset&, const std::vector<int>&, int);

}  // namespace banet
