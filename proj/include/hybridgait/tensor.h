/* Copyright (c) 2026 The HybridGait Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

// Dense row-major tensors with a reverse-mode tape.
//
// Every op returns a fresh Tensor. When gradient recording is enabled and
// any input requires a gradient, the result stores its inputs and a closure
// that pushes the result's gradient back into them. Tensor::backward()
// walks that graph in reverse topological order.

#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hybridgait/common.h"

namespace hybridgait::nn {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
size_t shape_numel(const Shape& s);

struct TensorImpl;
using BackwardFn = std::function<void(TensorImpl& self)>;

struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  BackwardFn backward_fn;

  std::vector<Real>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  /// Size of axis `i`; negative indices count from the back.
  int dim(int i) const;
  size_t numel() const { return impl_->data.size(); }

  std::span<Real> data() { return impl_->data; }
  std::span<const Real> data() const { return impl_->data; }
  std::vector<Real>& vec() { return impl_->data; }
  const std::vector<Real>& vec() const { return impl_->data; }
  /// Gradient buffer, zero-filled on first access.
  std::span<Real> grad() { return impl_->ensure_grad(); }
  bool has_grad() const { return !impl_->grad.empty(); }

  Real item() const;
  Real operator[](size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }

  /// Seeds d(self)/d(self) = 1 (self must be scalar) and backpropagates.
  /// The recorded graph is released afterwards.
  void backward();
  void zero_grad() { impl_->grad.clear(); }
  /// Same values, no graph, no gradient.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

bool grad_enabled();

/// Disables recording for its lifetime (inference, optimizer updates).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Builds an op result. `fn` is attached only when recording is enabled and
/// at least one input requires a gradient.
Tensor make_result(Shape shape, std::vector<Real> data, std::initializer_list<Tensor> inputs,
                   BackwardFn fn);
Tensor make_result(Shape shape, std::vector<Real> data, const std::vector<Tensor>& inputs,
                   BackwardFn fn);

/// Adds `g` into the gradient of `t` if `t` requires one.
void accumulate_grad(const Tensor& t, std::span<const Real> g);

}  // namespace hybridgait::nn
