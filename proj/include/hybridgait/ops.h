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

// Differentiable primitives shared by all branches.

#pragma once

#include <vector>

#include "hybridgait/tensor.h"

namespace hybridgait::nn {

// Elementwise with numpy-style broadcasting (trailing axes aligned).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real s);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, Real slope = 0.01);
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
/// x[..., start:start+length, ...] along `axis`.
Tensor slice(const Tensor& x, int axis, int start, int length);
Tensor concat(const std::vector<Tensor>& xs, int axis);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
/// Reductions drop the reduced axis.
Tensor mean_axis(const Tensor& x, int axis);
Tensor max_axis(const Tensor& x, int axis);

/// y = x W^T + b over the last axis. W: [out, in], b: [out] or undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
/// Batched product of [B,m,k] and [B,k,n] (optionally transposed operands).
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_a = false, bool transpose_b = false);
Tensor softmax_last(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps = 1e-5);

/// Stride-1 2D convolution. x: [N,Ci,H,W], w: [Co,Ci,kh,kw], b: [Co] or
/// undefined. Zero padding `pad` on every side.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad);
/// Non-overlapping 2x2 max pooling; H and W must be even.
Tensor max_pool2x2(const Tensor& x);

}  // namespace hybridgait::nn
