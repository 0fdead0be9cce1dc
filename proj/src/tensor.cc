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

#include "hybridgait/tensor.h"

#include <unordered_set>

namespace hybridgait::nn {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (int d : s) {
    if (d < 0) throw ValidationError("negative dimension in shape " + shape_str(s));
    n *= static_cast<size_t>(d);
  }
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<Real> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ValidationError("Tensor::from: shape " + shape_str(shape) + " needs " +
                          std::to_string(shape_numel(shape)) + " values, got " +
                          std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

int Tensor::dim(int i) const {
  const int n = ndim();
  if (i < 0) i += n;
  if (i < 0 || i >= n) throw ValidationError("axis out of range for shape " + shape_str(shape()));
  return impl_->shape[i];
}

Real Tensor::item() const {
  if (numel() != 1) throw ValidationError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

void Tensor::backward() {
  if (numel() != 1) throw ValidationError("backward() needs a scalar, got " + shape_str(shape()));
  if (!impl_->requires_grad) throw ValidationError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImpl*, size_t>> stack{{impl_.get(), 0}};
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  impl_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  // Release the graph; interior gradients are dropped, leaf gradients stay.
  for (TensorImpl* node : order) {
    if (node->backward_fn) {
      node->backward_fn = nullptr;
      node->parents.clear();
      if (node != impl_.get()) {
        node->grad.clear();
        node->grad.shrink_to_fit();
      }
    }
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

namespace {

template <typename Range>
Tensor make_result_impl(Shape shape, std::vector<Real> data, const Range& inputs, BackwardFn fn) {
  if (shape_numel(shape) != data.size()) {
    throw ValidationError("internal: op result size mismatch for shape " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool needs = false;
  if (g_grad_enabled) {
    for (const Tensor& t : inputs) needs = needs || (t.defined() && t.requires_grad());
  }
  if (needs) {
    impl->requires_grad = true;
    for (const Tensor& t : inputs) {
      if (t.defined() && t.requires_grad()) impl->parents.push_back(t.impl_ptr());
    }
    impl->backward_fn = std::move(fn);
  }
  return Tensor(std::move(impl));
}

}  // namespace

Tensor make_result(Shape shape, std::vector<Real> data, std::initializer_list<Tensor> inputs,
                   BackwardFn fn) {
  return make_result_impl(std::move(shape), std::move(data), inputs, std::move(fn));
}

Tensor make_result(Shape shape, std::vector<Real> data, const std::vector<Tensor>& inputs,
                   BackwardFn fn) {
  return make_result_impl(std::move(shape), std::move(data), inputs, std::move(fn));
}

void accumulate_grad(const Tensor& t, std::span<const Real> g) {
  if (!t.defined() || !t.requires_grad()) return;
  auto& dst = t.impl()->ensure_grad();
  for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

}  // namespace hybridgait::nn
