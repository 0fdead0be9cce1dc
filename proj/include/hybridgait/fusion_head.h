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

#include <string>
#include <vector>

#include "hybridgait/layers.h"

namespace hybridgait {

/// F_hat[i,c] = F[i,c] @ F_t[i] + F_pro[i,c] with square h x h maps.
/// An undefined `f_t` acts as the identity and an undefined `f_pro` as zero.
/// F: [N, C, h, h]; f_t: [N, h, h]; f_pro: [N, C, h, h].
nn::Tensor fuse(const nn::Tensor& f, const nn::Tensor& f_t, const nn::Tensor& f_pro);

/// Elementwise max over frames: [B, T, C, h, w] -> [B, C, h, w], or a single
/// sequence [T, C, h, w] -> [C, h, w].
nn::Tensor set_pool(const nn::Tensor& fhat);

/// Horizontal strips pooled by max + mean, each strip mapped by its own
/// linear map. [B, C, H, W] (or [C, H, W]) -> [B, parts, part_dim].
class HorizontalPyramidPooling {
 public:
  HorizontalPyramidPooling() = default;
  HorizontalPyramidPooling(nn::ParameterStore& store, const std::string& name, int channels, int parts, int part_dim,
                           nn::Rng& rng);

  /// [B, C, H, W] -> [B, C, parts] pooled strip vectors (before projection).
  nn::Tensor pool_strips(const nn::Tensor& map) const;
  nn::Tensor operator()(const nn::Tensor& map) const;

  int parts() const { return parts_; }
  nn::Tensor weight;  // [parts, C, part_dim]

 private:
  int parts_ = 16;
};

/// Per-part identity classifier: [B, parts, d] -> logits [B, parts, num_ids].
class PartClassifier {
 public:
  PartClassifier() = default;
  PartClassifier(nn::ParameterStore& store, const std::string& name, int parts, int part_dim, int num_ids,
                 nn::Rng& rng);
  nn::Tensor operator()(const nn::Tensor& parts) const;
  int num_ids() const { return weight.dim(2); }
  nn::Tensor weight;  // [parts, d, num_ids]
};

constexpr Real kTripletMargin = 0.2;

/// Batch-all triplet loss per part on Euclidean distances. Per part, the
/// mean of max(0, margin + d(a,p) - d(a,n)) over triplets with positive
/// loss (0 when none); then the mean over parts. parts: [B, P, d].
nn::Tensor triplet_loss(const nn::Tensor& parts, const std::vector<int>& labels, Real margin = kTripletMargin);

/// Softmax cross-entropy averaged over batch and parts. logits: [B, P, n].
nn::Tensor cross_entropy(const nn::Tensor& logits, const std::vector<int>& labels);

/// Cross-entropy of the per-part classifier logits.
nn::Tensor ce_loss(const nn::Tensor& parts, const std::vector<int>& labels, const PartClassifier& classifier);

struct LossBundle {
  nn::Tensor total;
  Real triplet = 0;
  Real ce = 0;
  Real alpha = 1.0;
  Real beta = 0.1;
};

LossBundle combined_loss(const nn::Tensor& triplet, const nn::Tensor& ce, Real alpha = 1.0, Real beta = 0.1);

}  // namespace hybridgait
