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

#include "hybridgait/layers.h"

namespace hybridgait {

/// Per-pixel sampling offsets and modulation for every kernel tap.
/// offsets: [N, 2K, h, w] with channel 2k = dy and 2k+1 = dx of tap k
/// (feature-map pixels); mask: [N, K, h, w] in (0,1).
struct DeformField {
  nn::Tensor offsets;
  nn::Tensor mask;
};

/// Modulated deformable convolution, stride 1, "same" output size.
///
/// out[o](p) = sum_k sum_c weight[o,c,k] * mask_k(p) * f[c](p + p_k + offset_k(p))
///
/// where p_k walks the kernel grid centered on p and f is read by bilinear
/// interpolation with zeros outside the map. weight: [Co, C, kh, kw] with
/// odd kh, kw; tap k = ky * kw + kx.
nn::Tensor deformable_sample(const nn::Tensor& f, const DeformField& field, const nn::Tensor& weight);

/// Silhouette-guided alignment of projected-silhouette features onto the
/// capture-view appearance features.
class SilhouetteGuidedDeformation {
 public:
  SilhouetteGuidedDeformation() = default;
  /// Offset and mask heads start at zero (zero offsets, mask 0.5); the
  /// sampling kernel starts as twice the centered identity, so the initial
  /// output equals the projected features.
  SilhouetteGuidedDeformation(nn::ParameterStore& store, const std::string& name, int channels, int kernel,
                              nn::Rng& rng);

  /// Both inputs [N, C, h, w].
  DeformField predict_deformation(const nn::Tensor& f_app, const nn::Tensor& f_pro) const;
  nn::Tensor forward(const nn::Tensor& f_app, const nn::Tensor& f_pro) const;

  int taps() const { return kernel_ * kernel_; }

  nn::Conv2d offset_head, mask_head;
  nn::Tensor weight;  // [C, C, kernel, kernel]

 private:
  int kernel_ = 3;
};

}  // namespace hybridgait
