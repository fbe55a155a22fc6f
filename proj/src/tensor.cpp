// Copyright 2026 The banet Authors
// SPDX-License-Identifier: Apache-2.0

#include "banet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace banet {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {

std::atomic<std::uint64_t> next_id{1};

#if defined(__GLIBC__)
// Activations are large and short-lived; keep them on the heap instead of
// mapping and faulting in fresh pages on every step.
const bool allocator_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif
thread_local bool grad_mode = true;

void check_shape(const Shape& shape) {
  for (auto e : shape) {
    if (e <= 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  }
}

}  // namespace

bool grad_enabled() { return grad_mode; }

NoGradGuard::NoGradGuard() : previous_(grad_mode) { grad_mode = false; }
NoGradGuard::~NoGradGuard() { grad_mode = previous_; }

template <typename T>
Tensor<T>::Tensor() = default;

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<TensorImpl<T>>()) {
  check_shape(shape);
  impl_->data.assign(static_cast<std::size_t>(banet::numel(shape)), fill);
  impl_->shape = std::move(shape);
  impl_->id = next_id++;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<TensorImpl<T>>()) {
  check_shape(shape);
  if (static_cast<std::int64_t>(values.size()) != banet::numel(shape)) {
    throw DimensionError("shape " + to_string(shape) + " needs " + std::to_string(banet::numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->id = next_id++;
}

template <typename T>
Tensor<T> Tensor<T>::wrap(std::shared_ptr<TensorImpl<T>> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  if (t.impl_->id == 0) t.impl_->id = next_id++;
  return t;
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  if (flag) {
    impl_->grad.assign(impl_->data.size(), T(0));
  } else {
    impl_->grad.clear();
  }
  return *this;
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw RankError("item() needs a single-element tensor, got " + to_string(shape()));
  return impl_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(impl_->shape, impl_->data);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  check_shape(shape);
  if (banet::numel(shape) != static_cast<std::int64_t>(numel())) {
    throw DimensionError("cannot reshape " + to_string(this->shape()) + " to " + to_string(shape));
  }
  auto impl = std::make_shared<TensorImpl<T>>(*impl_);
  impl->shape = std::move(shape);
  impl->id = 0;
  impl->is_leaf = true;
  impl->requires_grad = false;
  impl->grad.clear();
  return wrap(std::move(impl));
}

template <typename T>
Tape<T>& Tape<T>::current() {
  thread_local Tape<T> tape;
  return tape;
}

template <typename T>
void Tape<T>::record(std::string op, std::vector<std::shared_ptr<TensorImpl<T>>> inputs,
                     std::shared_ptr<TensorImpl<T>> output, std::function<void()> backward) {
  output->requires_grad = true;
  output->is_leaf = false;
  nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(output), std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw RankError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  for (auto& node : nodes_) {
    node.output->grad.assign(node.output->data.size(), T(0));
  }
  auto loss_impl = loss.impl();
  if (loss_impl->grad.size() != 1) loss_impl->grad.assign(1, T(0));
  loss_impl->grad[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->backward();
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace banet
