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

#include "hybridgait/temporal_branch.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <tuple>

namespace hybridgait {

using nn::Tensor;

AlignmentMap compute_alignment(const CanonicalLayout& layout, int rows, int cols, int k) {
  layout.validate();
  const int nj = layout.num_joints();
  if (rows < 1 || cols < 1) throw ValidationError("compute_alignment: grid must be at least 1x1");
  if (k < 1 || k > nj) {
    throw ValidationError("compute_alignment: k=" + std::to_string(k) + " outside [1, " + std::to_string(nj) + "]");
  }
  std::vector<double> jy(nj), jx(nj);
  for (int j = 0; j < nj; ++j) {
    jy[j] = static_cast<double>(layout.coords[j].first) * rows / layout.H;
    jx[j] = static_cast<double>(layout.coords[j].second) * cols / layout.W;
  }
  AlignmentMap amap;
  amap.rows = rows;
  amap.cols = cols;
  amap.num_joints = nj;
  amap.k = k;
  amap.omega.assign(static_cast<size_t>(rows) * cols * nj, 0);
  amap.selected.reserve(static_cast<size_t>(rows) * cols * k);
  std::vector<std::pair<double, int>> dist(nj);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (int j = 0; j < nj; ++j) {
        const double dy = r - jy[j], dx = c - jx[j];
        dist[j] = {dy * dy + dx * dx, j};
      }
      // Pair ordering compares distance first, then joint index.
      std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
      std::vector<int> chosen;
      for (int i = 0; i < k; ++i) chosen.push_back(dist[i].second);
      std::sort(chosen.begin(), chosen.end());
      const int region = r * cols + c;
      for (int j : chosen) {
        amap.omega[static_cast<size_t>(region) * nj + j] = 1;
        amap.selected.push_back(j);
      }
    }
  }
  return amap;
}

namespace {

std::shared_ptr<const AlignmentMap> cached_alignment(const CanonicalLayout& layout, int rows, int cols, int k) {
  using Key = std::tuple<std::vector<std::pair<int, int>>, int, int, int, int, int>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const AlignmentMap>> cache;
  Key key{layout.coords, layout.H, layout.W, rows, cols, k};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto amap = std::make_shared<const AlignmentMap>(compute_alignment(layout, rows, cols, k));
  cache.emplace(std::move(key), amap);
  return amap;
}

}  // namespace

Tensor canonical_align(const Tensor& tokens, const AlignmentMap& amap) {
  if (tokens.ndim() != 3 || tokens.dim(1) != amap.num_joints) {
    throw ValidationError("canonical_align: tokens " + nn::shape_str(tokens.shape()) + " do not carry " +
                          std::to_string(amap.num_joints) + " joints");
  }
  if (amap.selected.size() != static_cast<size_t>(amap.num_regions()) * amap.k) {
    throw ValidationError("canonical_align: alignment rows must each select exactly k joints");
  }
  const int n = tokens.dim(0), nj = tokens.dim(1), c = tokens.dim(2), nr = amap.num_regions(), k = amap.k;
  const Real inv_k = 1.0 / k;
  std::vector<Real> out(static_cast<size_t>(n) * c * nr, 0.0);
  const auto& x = tokens.vec();
  for (int i = 0; i < n; ++i) {
    const Real* frame = x.data() + static_cast<size_t>(i) * nj * c;
    Real* dst = out.data() + static_cast<size_t>(i) * c * nr;
    for (int r = 0; r < nr; ++r) {
      const int* sel = amap.selected.data() + static_cast<size_t>(r) * k;
      for (int ch = 0; ch < c; ++ch) {
        Real s = 0;
        for (int q = 0; q < k; ++q) s += frame[static_cast<size_t>(sel[q]) * c + ch];
        dst[static_cast<size_t>(ch) * nr + r] = s * inv_k;
      }
    }
  }
  const std::vector<int> selected = amap.selected;
  return nn::make_result({n, c, amap.rows, amap.cols}, std::move(out), {tokens},
                         [tokens, selected, n, nj, c, nr, k, inv_k](nn::TensorImpl& self) {
    auto& gx = tokens.impl()->ensure_grad();
    for (int i = 0; i < n; ++i) {
      Real* gframe = gx.data() + static_cast<size_t>(i) * nj * c;
      const Real* g = self.grad.data() + static_cast<size_t>(i) * c * nr;
      for (int r = 0; r < nr; ++r) {
        const int* sel = selected.data() + static_cast<size_t>(r) * k;
        for (int ch = 0; ch < c; ++ch) {
          const Real v = g[static_cast<size_t>(ch) * nr + r] * inv_k;
          for (int q = 0; q < k; ++q) gframe[static_cast<size_t>(sel[q]) * c + ch] += v;
        }
      }
    }
  });
}

Tensor modulate(const Tensor& aligned, const Tensor& weight, const Tensor& bias) {
  if (aligned.ndim() != 4) throw ValidationError("modulate: expected [N,C,h,w], got " + nn::shape_str(aligned.shape()));
  if (weight.ndim() != 4 || weight.dim(2) != 1 || weight.dim(3) != 1) {
    throw ValidationError("modulate: weight must be a pointwise [C,C,1,1] kernel");
  }
  return nn::mean_axis(nn::relu(nn::conv2d(aligned, weight, bias, 0)), 1);
}

TemporalBranch::TemporalBranch(nn::ParameterStore& store, const std::string& name, const TemporalConfig& config,
                               const Skeleton& skeleton, nn::Rng& rng)
    : config_(config) {
  skeleton.validate_smpl();
  const int c = config.channels;
  joint_embed = nn::Linear(store, name + ".joint_embed", 3, c, true, rng);
  joint_pos = store.create_uniform(name + ".joint_pos", {kSmplJointCount, c}, 0.02, rng);
  temporal_pos = store.create_uniform(name + ".temporal_pos", {config.max_frames, c}, 0.02, rng);
  for (int l = 0; l < config.spatial_layers; ++l) {
    spatial_layers.emplace_back(store, name + ".spatial" + std::to_string(l), c, config.heads, config.ff_dim, rng);
  }
  for (int l = 0; l < config.temporal_layers; ++l) {
    temporal_layers.emplace_back(store, name + ".temporal" + std::to_string(l), c, config.heads, config.ff_dim, rng);
  }
  if (config.mapping == JointToGrid::kCanonical) {
    const CanonicalLayout layout = rest_pose_canonical_coords(skeleton, config.canonical_H, config.canonical_W);
    alignment_ = cached_alignment(layout, config.grid, config.grid, config.k_neighbors);
  } else {
    // Starts as a uniform average over joints, perturbed.
    const int nr = config.grid * config.grid;
    grid_map = store.create_uniform(name + ".grid_map", {nr, kSmplJointCount}, 0.02, rng);
    for (auto& v : grid_map.vec()) v += 1.0 / kSmplJointCount;
  }
  modulate_conv = nn::Conv2d(store, name + ".modulate", c, c, 1, true, rng);
}

Tensor TemporalBranch::embed_joints(const Tensor& pose) const {
  Tensor p = pose.ndim() == 3 ? nn::reshape(pose, {1, pose.dim(0), pose.dim(1), pose.dim(2)}) : pose;
  if (p.ndim() != 4 || p.dim(2) != kSmplJointCount || p.dim(3) != 3) {
    throw ValidationError("embed_joints: expected [B,T,24,3] pose, got " + nn::shape_str(pose.shape()));
  }
  for (Real v : p.data()) {
    if (!std::isfinite(v)) throw ValidationError("embed_joints: non-finite pose value");
  }
  return nn::add(joint_embed(p), joint_pos);
}

Tensor TemporalBranch::spatial_transform(const Tensor& tokens, std::vector<Tensor>* attention) const {
  if (tokens.ndim() != 4 || tokens.dim(2) != kSmplJointCount) {
    throw ValidationError("spatial_transform: expected [B,T,24,C] tokens, got " + nn::shape_str(tokens.shape()));
  }
  const nn::Shape shape = tokens.shape();
  Tensor x = nn::reshape(tokens, {shape[0] * shape[1], shape[2], shape[3]});
  for (const auto& layer : spatial_layers) {
    Tensor attn;
    x = layer(x, attention ? &attn : nullptr);
    if (attention) attention->push_back(attn);
  }
  return nn::reshape(x, shape);
}

Tensor TemporalBranch::temporal_transform(const Tensor& tokens) const {
  if (tokens.ndim() != 4 || tokens.dim(2) != kSmplJointCount) {
    throw ValidationError("temporal_transform: expected [B,T,24,C] tokens, got " + nn::shape_str(tokens.shape()));
  }
  const int b = tokens.dim(0), t = tokens.dim(1), c = tokens.dim(3);
  if (t > config_.max_frames) {
    throw ValidationError("temporal_transform: " + std::to_string(t) + " frames exceed the positional table of " +
                          std::to_string(config_.max_frames));
  }
  Tensor frames = nn::add(nn::mean_axis(tokens, 2), nn::slice(temporal_pos, 0, 0, t));  // [B,T,C]
  for (const auto& layer : temporal_layers) frames = layer(frames);
  return nn::add(tokens, nn::reshape(frames, {b, t, 1, c}));
}

Tensor TemporalBranch::align(const Tensor& tokens) const {
  const int bt = tokens.dim(0) * tokens.dim(1), c = tokens.dim(3), g = config_.grid;
  Tensor flat = nn::reshape(tokens, {bt, kSmplJointCount, c});
  if (alignment_) return canonical_align(flat, *alignment_);
  Tensor mixed = nn::linear(nn::permute(flat, {0, 2, 1}), grid_map, Tensor());  // [BT, C, g*g]
  return nn::reshape(mixed, {bt, c, g, g});
}

Tensor TemporalBranch::modulate(const Tensor& aligned) const {
  return hybridgait::modulate(aligned, modulate_conv.weight, modulate_conv.bias);
}

Tensor TemporalBranch::forward(const Tensor& pose) const {
  return modulate(align(temporal_transform(spatial_transform(embed_joints(pose)))));
}

}  // namespace hybridgait
