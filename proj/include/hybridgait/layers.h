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

#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hybridgait/ops.h"

namespace hybridgait::nn {

using Rng = std::mt19937_64;

/// Owns every trainable tensor of a model under a unique dotted name, in
/// creation order (which is also checkpoint order).
class ParameterStore {
 public:
  Tensor create(const std::string& name, Shape shape);
  Tensor create_uniform(const std::string& name, Shape shape, Real bound, Rng& rng);
  Tensor create_constant(const std::string& name, Shape shape, Real value);

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  Tensor find(const std::string& name) const;
  size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in, int out, bool bias, Rng& rng);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }

  Tensor weight;  // [out, in]
  Tensor bias;    // [out] or undefined
};

class Conv2d {
 public:
  Conv2d() = default;
  /// Kaiming-uniform weights; `pad` = (k - 1) / 2 keeps the spatial size.
  Conv2d(ParameterStore& store, const std::string& name, int in, int out, int kernel, bool bias, Rng& rng);
  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, pad); }

  Tensor weight;  // [out, in, k, k]
  Tensor bias;
  int pad = 0;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, int dim);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }

  Tensor gamma, beta;
};

class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(ParameterStore& store, const std::string& name, int dim, int heads, Rng& rng);
  /// x: [B, L, dim]. If `attention` is non-null it receives the softmax
  /// weights, shape [B*heads, L, L].
  Tensor operator()(const Tensor& x, Tensor* attention = nullptr) const;

  int dim = 0, heads = 1;
  Linear qkv, out;
};

/// Pre-norm encoder layer: x + MHA(LN(x)), then x + FFN(LN(x)) with GELU.
class TransformerEncoderLayer {
 public:
  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(ParameterStore& store, const std::string& name, int dim, int heads, int ff_dim,
                          Rng& rng);
  Tensor operator()(const Tensor& x, Tensor* attention = nullptr) const;

  LayerNorm norm1, norm2;
  MultiHeadSelfAttention attn;
  Linear ff1, ff2;
};

}  // namespace hybridgait::nn
