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

#include "hybridgait/layers.h"

#include <cmath>

namespace hybridgait::nn {

Tensor ParameterStore::create(const std::string& name, Shape shape) {
  for (const auto& [n, t] : entries_) {
    if (n == name) throw ValidationError("duplicate parameter name '" + name + "'");
  }
  Tensor t = Tensor::zeros(std::move(shape), true);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParameterStore::create_uniform(const std::string& name, Shape shape, Real bound, Rng& rng) {
  Tensor t = create(name, std::move(shape));
  std::uniform_real_distribution<Real> dist(-bound, bound);
  for (auto& v : t.vec()) v = dist(rng);
  return t;
}

Tensor ParameterStore::create_constant(const std::string& name, Shape shape, Real value) {
  Tensor t = create(name, std::move(shape));
  std::fill(t.vec().begin(), t.vec().end(), value);
  return t;
}

Tensor ParameterStore::find(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ValidationError("no parameter named '" + name + "'");
}

size_t ParameterStore::scalar_count() const {
  size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

Linear::Linear(ParameterStore& store, const std::string& name, int in, int out, bool with_bias, Rng& rng) {
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(in));
  weight = store.create_uniform(name + ".weight", {out, in}, bound, rng);
  if (with_bias) bias = store.create_uniform(name + ".bias", {out}, bound, rng);
}

Conv2d::Conv2d(ParameterStore& store, const std::string& name, int in, int out, int kernel, bool with_bias,
               Rng& rng)
    : pad((kernel - 1) / 2) {
  const Real fan_in = static_cast<Real>(in) * kernel * kernel;
  weight = store.create_uniform(name + ".weight", {out, in, kernel, kernel}, std::sqrt(6.0 / fan_in), rng);
  if (with_bias) bias = store.create_uniform(name + ".bias", {out}, 1.0 / std::sqrt(fan_in), rng);
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, int dim) {
  gamma = store.create_constant(name + ".gamma", {dim}, 1.0);
  beta = store.create_constant(name + ".beta", {dim}, 0.0);
}

MultiHeadSelfAttention::MultiHeadSelfAttention(ParameterStore& store, const std::string& name, int dim_,
                                               int heads_, Rng& rng)
    : dim(dim_), heads(heads_) {
  if (heads < 1 || dim % heads != 0) {
    throw ValidationError("attention: dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) +
                          " heads");
  }
  qkv = Linear(store, name + ".qkv", dim, 3 * dim, true, rng);
  out = Linear(store, name + ".out", dim, dim, true, rng);
}

Tensor MultiHeadSelfAttention::operator()(const Tensor& x, Tensor* attention) const {
  if (x.ndim() != 3 || x.dim(2) != dim) {
    throw ValidationError("attention: expected [B,L," + std::to_string(dim) + "], got " + shape_str(x.shape()));
  }
  const int b = x.dim(0), l = x.dim(1), dh = dim / heads;
  Tensor packed = permute(reshape(qkv(x), {b, l, 3, heads, dh}), {2, 0, 3, 1, 4});  // [3,B,h,L,dh]
  auto part = [&](int i) { return reshape(slice(packed, 0, i, 1), {b * heads, l, dh}); };
  Tensor q = part(0), k = part(1), v = part(2);
  Tensor probs = softmax_last(scale(bmm(q, k, false, true), 1.0 / std::sqrt(static_cast<Real>(dh))));
  if (attention) *attention = probs;
  Tensor ctx = bmm(probs, v);                                                 // [B*h, L, dh]
  ctx = reshape(permute(reshape(ctx, {b, heads, l, dh}), {0, 2, 1, 3}), {b, l, dim});
  return out(ctx);
}

TransformerEncoderLayer::TransformerEncoderLayer(ParameterStore& store, const std::string& name, int dim,
                                                 int heads, int ff_dim, Rng& rng)
    : norm1(store, name + ".norm1", dim),
      norm2(store, name + ".norm2", dim),
      attn(store, name + ".attn", dim, heads, rng),
      ff1(store, name + ".ff1", dim, ff_dim, true, rng),
      ff2(store, name + ".ff2", ff_dim, dim, true, rng) {}

Tensor TransformerEncoderLayer::operator()(const Tensor& x, Tensor* attention) const {
  Tensor h = add(x, attn(norm1(x), attention));
  return add(h, ff2(gelu(ff1(norm2(h)))));
}

}  // namespace hybridgait::nn
