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

#include "hybridgait/fusion_head.h"

#include <algorithm>
#include <cmath>
#include <set>

namespace hybridgait {

using nn::Tensor;

Tensor fuse(const Tensor& f, const Tensor& f_t, const Tensor& f_pro) {
  if (f.ndim() != 4 || f.dim(2) != f.dim(3)) {
    throw ValidationError("fuse: appearance maps must be square [N,C,h,h], got " + nn::shape_str(f.shape()));
  }
  const int n = f.dim(0), c = f.dim(1), h = f.dim(2);
  Tensor out = f;
  if (f_t.defined()) {
    if (f_t.shape() != nn::Shape{n, h, h}) {
      throw ValidationError("fuse: pose map " + nn::shape_str(f_t.shape()) + " does not match " +
                            nn::shape_str(f.shape()));
    }
    out = nn::reshape(nn::bmm(nn::reshape(f, {n, c * h, h}), f_t), {n, c, h, h});
  }
  if (f_pro.defined()) {
    if (f_pro.shape() != f.shape()) {
      throw ValidationError("fuse: projection maps " + nn::shape_str(f_pro.shape()) + " do not match " +
                            nn::shape_str(f.shape()));
    }
    out = nn::add(out, f_pro);
  }
  return out;
}

Tensor set_pool(const Tensor& fhat) {
  if (fhat.ndim() != 4 && fhat.ndim() != 5) {
    throw ValidationError("set_pool: expected [T,C,h,w] or [B,T,C,h,w], got " + nn::shape_str(fhat.shape()));
  }
  const int axis = fhat.ndim() == 5 ? 1 : 0;
  if (fhat.dim(axis) == 0) throw ValidationError("set_pool: empty frame set");
  return nn::max_axis(fhat, axis);
}

HorizontalPyramidPooling::HorizontalPyramidPooling(nn::ParameterStore& store, const std::string& name, int channels,
                                                   int parts, int part_dim, nn::Rng& rng)
    : parts_(parts) {
  if (parts < 1 || part_dim < 1) throw ValidationError("HPP: parts and part_dim must be positive");
  weight = store.create_uniform(name + ".weight", {parts, channels, part_dim}, std::sqrt(6.0 / (channels + part_dim)),
                                rng);
}

Tensor HorizontalPyramidPooling::pool_strips(const Tensor& map) const {
  Tensor x = map.ndim() == 3 ? nn::reshape(map, {1, map.dim(0), map.dim(1), map.dim(2)}) : map;
  if (x.ndim() != 4) throw ValidationError("hpp: expected [B,C,H,W], got " + nn::shape_str(map.shape()));
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % parts_ != 0) {
    throw ValidationError("hpp: height " + std::to_string(h) + " is not divisible by " + std::to_string(parts_) +
                          " parts");
  }
  Tensor strips = nn::reshape(x, {b, c, parts_, (h / parts_) * w});
  return nn::add(nn::max_axis(strips, 3), nn::mean_axis(strips, 3));
}

Tensor HorizontalPyramidPooling::operator()(const Tensor& map) const {
  Tensor pooled = pool_strips(map);  // [B, C, P]
  if (pooled.dim(1) != weight.dim(1)) {
    throw ValidationError("hpp: map has " + std::to_string(pooled.dim(1)) + " channels, expected " +
                          std::to_string(weight.dim(1)));
  }
  Tensor per_part = nn::bmm(nn::permute(pooled, {2, 0, 1}), weight);  // [P, B, d]
  return nn::permute(per_part, {1, 0, 2});
}

PartClassifier::PartClassifier(nn::ParameterStore& store, const std::string& name, int parts, int part_dim,
                               int num_ids, nn::Rng& rng) {
  if (num_ids < 1) throw ValidationError("classifier needs at least one identity");
  weight = store.create_uniform(name + ".weight", {parts, part_dim, num_ids}, 1.0 / std::sqrt(part_dim), rng);
}

Tensor PartClassifier::operator()(const Tensor& parts) const {
  if (parts.ndim() != 3 || parts.dim(1) != weight.dim(0) || parts.dim(2) != weight.dim(1)) {
    throw ValidationError("classifier: parts " + nn::shape_str(parts.shape()) + " vs weight " +
                          nn::shape_str(weight.shape()));
  }
  return nn::permute(nn::bmm(nn::permute(parts, {1, 0, 2}), weight), {1, 0, 2});
}

Tensor triplet_loss(const Tensor& parts, const std::vector<int>& labels, Real margin) {
  if (parts.ndim() != 3 || static_cast<size_t>(parts.dim(0)) != labels.size()) {
    throw ValidationError("triplet_loss: parts " + nn::shape_str(parts.shape()) + " with " +
                          std::to_string(labels.size()) + " labels");
  }
  const int b = parts.dim(0), np = parts.dim(1), d = parts.dim(2);
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw ValidationError("triplet_loss: batch needs at least two identities");
  }
  bool has_positive = false;
  for (int i = 0; i < b && !has_positive; ++i)
    for (int j = i + 1; j < b; ++j) has_positive = has_positive || labels[i] == labels[j];
  if (!has_positive) throw ValidationError("triplet_loss: no identity has two sequences in the batch");

  const auto& x = parts.vec();
  auto at = [&](int i, int p) { return x.data() + (static_cast<size_t>(i) * np + p) * d; };
  // dist[p][i*b+j]
  std::vector<std::vector<Real>> dist(np, std::vector<Real>(static_cast<size_t>(b) * b, 0.0));
  for (int p = 0; p < np; ++p)
    for (int i = 0; i < b; ++i)
      for (int j = i + 1; j < b; ++j) {
        const Real* u = at(i, p);
        const Real* v = at(j, p);
        Real sq = 0;
        for (int e = 0; e < d; ++e) sq += (u[e] - v[e]) * (u[e] - v[e]);
        dist[p][static_cast<size_t>(i) * b + j] = dist[p][static_cast<size_t>(j) * b + i] = std::sqrt(sq);
      }
  // Coefficient of each pair distance in the loss, per part.
  std::vector<std::vector<Real>> coef(np, std::vector<Real>(static_cast<size_t>(b) * b, 0.0));
  Real total = 0;
  for (int p = 0; p < np; ++p) {
    const auto& D = dist[p];
    Real sum = 0;
    long active = 0;
    for (int a = 0; a < b; ++a)
      for (int q = 0; q < b; ++q) {
        if (q == a || labels[q] != labels[a]) continue;
        for (int n = 0; n < b; ++n) {
          if (labels[n] == labels[a]) continue;
          const Real l = margin + D[static_cast<size_t>(a) * b + q] - D[static_cast<size_t>(a) * b + n];
          if (l > 0) {
            sum += l;
            ++active;
            coef[p][static_cast<size_t>(a) * b + q] += 1;
            coef[p][static_cast<size_t>(a) * b + n] -= 1;
          }
        }
      }
    if (active > 0) {
      total += sum / active;
      for (auto& v : coef[p]) v /= static_cast<Real>(active) * np;
    }
  }
  total /= np;
  return nn::make_result({}, {total}, {parts}, [parts, dist, coef, b, np, d](nn::TensorImpl& self) {
    const Real g = self.grad[0];
    auto& gx = parts.impl()->ensure_grad();
    const auto& x = parts.vec();
    for (int p = 0; p < np; ++p)
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j) {
          const Real cf = coef[p][static_cast<size_t>(i) * b + j];
          const Real dd = dist[p][static_cast<size_t>(i) * b + j];
          if (cf == 0.0 || dd == 0.0) continue;  // zero subgradient at coincident points
          const size_t oi = (static_cast<size_t>(i) * np + p) * d, oj = (static_cast<size_t>(j) * np + p) * d;
          const Real s = g * cf / dd;
          for (int e = 0; e < d; ++e) {
            const Real diff = s * (x[oi + e] - x[oj + e]);
            gx[oi + e] += diff;
            gx[oj + e] -= diff;
          }
        }
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 3 || static_cast<size_t>(logits.dim(0)) != labels.size()) {
    throw ValidationError("cross_entropy: logits " + nn::shape_str(logits.shape()) + " with " +
                          std::to_string(labels.size()) + " labels");
  }
  const int b = logits.dim(0), np = logits.dim(1), n = logits.dim(2);
  for (int y : labels) {
    if (y < 0 || y >= n) {
      throw ValidationError("cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(n) + ")");
    }
  }
  const auto& z = logits.vec();
  std::vector<Real> prob(z.size());
  Real total = 0;
  for (int i = 0; i < b; ++i)
    for (int p = 0; p < np; ++p) {
      const size_t o = (static_cast<size_t>(i) * np + p) * n;
      const Real mx = *std::max_element(z.begin() + o, z.begin() + o + n);
      Real se = 0;
      for (int k = 0; k < n; ++k) se += std::exp(z[o + k] - mx);
      const Real lse = mx + std::log(se);
      for (int k = 0; k < n; ++k) prob[o + k] = std::exp(z[o + k] - lse);
      total += lse - z[o + labels[i]];
    }
  const Real inv = 1.0 / (static_cast<Real>(b) * np);
  return nn::make_result({}, {total * inv}, {logits}, [logits, prob, labels, b, np, n, inv](nn::TensorImpl& self) {
    const Real g = self.grad[0] * inv;
    auto& gz = logits.impl()->ensure_grad();
    for (int i = 0; i < b; ++i)
      for (int p = 0; p < np; ++p) {
        const size_t o = (static_cast<size_t>(i) * np + p) * n;
        for (int k = 0; k < n; ++k) gz[o + k] += g * (prob[o + k] - (k == labels[i] ? 1.0 : 0.0));
      }
  });
}

Tensor ce_loss(const Tensor& parts, const std::vector<int>& labels, const PartClassifier& classifier) {
  return cross_entropy(classifier(parts), labels);
}

LossBundle combined_loss(const Tensor& triplet, const Tensor& ce, Real alpha, Real beta) {
  LossBundle out;
  out.triplet = triplet.item();
  out.ce = ce.item();
  if (!std::isfinite(out.triplet) || !std::isfinite(out.ce)) throw ValidationError("combined_loss: non-finite term");
  out.alpha = alpha;
  out.beta = beta;
  out.total = nn::add(nn::scale(triplet, alpha), nn::scale(ce, beta));
  return out;
}

}  // namespace hybridgait
