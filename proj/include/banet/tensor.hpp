// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "banet/common.hpp"

namespace banet {

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  // Outputs of recorded operations; their grad is rebuilt on every backward.
  bool is_leaf = true;
  std::uint64_t id = 0;
};

/// Reference-counted handle to a dense row-major array.
///
/// Copies share storage. Use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor();
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }
  static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }
  /// Scalar of shape {1}.
  static Tensor scalar(T value) { return Tensor(Shape{1}, value); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::int64_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  std::uint64_t id() const { return impl_->id; }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  std::vector<T>& values() { return impl_->data; }
  const std::vector<T>& values() const { return impl_->data; }

  /// Empty span when the tensor does not track gradients.
  std::span<T> grad() { return impl_->grad; }
  std::span<const T> grad() const { return impl_->grad; }
  bool has_grad() const { return !impl_->grad.empty() || numel() == 0; }

  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return impl_->is_leaf; }
  Tensor& set_requires_grad(bool flag);
  void zero_grad();

  T item() const;
  T& operator[](std::size_t i) { return impl_->data[i]; }
  const T& operator[](std::size_t i) const { return impl_->data[i]; }

  /// Deep copy of the values; the copy is a leaf without gradient tracking.
  Tensor clone() const;
  /// Shares nothing with the tape; same values, no grad.
  Tensor detach() const { return clone(); }
  /// Same storage viewed with another shape of equal element count.
  Tensor reshaped(Shape shape) const;

  std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<TensorImpl<T>> impl);

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

/// Ordered record of differentiable operations for one thread.
template <typename T>
class Tape {
 public:
  struct Node {
    std::string op;
    std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
    std::shared_ptr<TensorImpl<T>> output;
    std::function<void()> backward;
  };

  static Tape& current();

  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  void reset() { nodes_.clear(); }

  void record(std::string op, std::vector<std::shared_ptr<TensorImpl<T>>> inputs,
              std::shared_ptr<TensorImpl<T>> output, std::function<void()> backward);

  /// Reverse sweep from a scalar loss. Leaf gradients accumulate across calls.
  void backward(const Tensor<T>& loss);

 private:
  std::vector<Node> nodes_;
};

/// True while operations are being recorded on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
void backward(const Tensor<T>& loss) {
  Tape<T>::current().backward(loss);
}

template <typename T>
void reset_tape() {
  Tape<T>::current().reset();
}

}  // namespace banet
