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

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hybridgait/layers.h"
#include "hybridgait/skeleton.h"

namespace hybridgait {

/// Binary joint-to-region selector. Region r = row * cols + col of the
/// target grid; `omega[r * num_joints + j]` is 1 when joint j is one of the
/// k nearest joints to that cell.
struct AlignmentMap {
  int rows = 0;
  int cols = 0;
  int num_joints = 0;
  int k = 0;
  std::vector<std::uint8_t> omega;
  std::vector<int> selected;  // per region, its k joint indices ascending

  int num_regions() const { return rows * cols; }
  std::uint8_t at(int region, int joint) const { return omega[static_cast<size_t>(region) * num_joints + joint]; }
  bool operator==(const AlignmentMap& o) const {
    return rows == o.rows && cols == o.cols && num_joints == o.num_joints && k == o.k && omega == o.omega;
  }
};

/// KNN assignment of rest-pose joints to grid cells. Joint j sits at
/// (h_j*rows/H, w_j*cols/W); cell (r, c) sits at its integer index; equal
/// distances go to the lower joint index.
AlignmentMap compute_alignment(const CanonicalLayout& layout, int rows, int cols, int k);

/// Averages the selected joint features of every region.
/// tokens: [N, J, C] -> [N, C, rows, cols].
nn::Tensor canonical_align(const nn::Tensor& tokens, const AlignmentMap& amap);

/// Pointwise conv + ReLU + channel mean: [N, C, h, w] -> [N, h, w].
nn::Tensor modulate(const nn::Tensor& aligned, const nn::Tensor& weight, const nn::Tensor& bias);

enum class JointToGrid {
  kCanonical,      // fixed KNN alignment map
  kLearnedLinear,  // learned [regions x joints] matrix, the non-canonical baseline
};

struct TemporalConfig {
  int channels = 64;
  int heads = 4;
  int ff_dim = 128;
  int spatial_layers = 2;
  int temporal_layers = 2;
  int max_frames = 512;
  int grid = 16;
  int k_neighbors = 7;
  int canonical_H = 15;
  int canonical_W = 10;
  JointToGrid mapping = JointToGrid::kCanonical;
};

/// Spatial-temporal transformer over SMPL joint rotations followed by the
/// joint-to-grid alignment and the modulate block.
class TemporalBranch {
 public:
  TemporalBranch() = default;
  TemporalBranch(nn::ParameterStore& store, const std::string& name, const TemporalConfig& config,
                 const Skeleton& skeleton, nn::Rng& rng);

  /// pose: [B, T, 24, 3] (or [T, 24, 3]) -> tokens [B, T, 24, C].
  nn::Tensor embed_joints(const nn::Tensor& pose) const;
  /// Per-frame attention over joints; shape preserved. `attention` receives
  /// the weights of every layer when non-null.
  nn::Tensor spatial_transform(const nn::Tensor& tokens, std::vector<nn::Tensor>* attention = nullptr) const;
  /// Joint-mean frame tokens -> temporal layers -> broadcast-add per frame.
  nn::Tensor temporal_transform(const nn::Tensor& tokens) const;
  /// [B, T, 24, C] -> [B*T, C, grid, grid].
  nn::Tensor align(const nn::Tensor& tokens) const;
  /// [B*T, C, grid, grid] -> [B*T, grid, grid].
  nn::Tensor modulate(const nn::Tensor& aligned) const;
  /// Whole branch: [B, T, 24, 3] -> F^t' as [B*T, grid, grid].
  nn::Tensor forward(const nn::Tensor& pose) const;

  const std::shared_ptr<const AlignmentMap>& alignment() const { return alignment_; }
  const TemporalConfig& config() const { return config_; }

  nn::Linear joint_embed;
  nn::Tensor joint_pos;     // [24, C]
  nn::Tensor temporal_pos;  // [max_frames, C]
  std::vector<nn::TransformerEncoderLayer> spatial_layers, temporal_layers;
  nn::Tensor grid_map;  // [grid*grid, 24], learned-linear mode only
  nn::Conv2d modulate_conv;

 private:
  TemporalConfig config_;
  std::shared_ptr<const AlignmentMap> alignment_;
};

}  // namespace hybridgait
