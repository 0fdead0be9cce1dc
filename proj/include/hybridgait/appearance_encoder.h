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

#include <array>
#include <string>

#include "hybridgait/layers.h"

namespace hybridgait {

inline constexpr int kSilhouetteSize = 64;
inline constexpr int kFeatureSize = 16;

struct EncoderConfig {
  std::array<int, 3> channels{32, 64, 128};
  Real leaky_slope = 0.01;
  bool bias = false;
};

/// Plain three-stage convolutional silhouette encoder:
/// 64x64 -> [conv conv] -> pool -> [conv conv] -> pool -> [conv conv] -> 16x16.
class AppearanceEncoder {
 public:
  AppearanceEncoder() = default;
  AppearanceEncoder(nn::ParameterStore& store, const std::string& name, const EncoderConfig& config, nn::Rng& rng);

  /// sils: [N,64,64] or [N,1,64,64] with values in [0,1]. Returns [N,C,16,16].
  nn::Tensor encode(const nn::Tensor& sils) const;
  int out_channels() const { return config_.channels[2]; }

 private:
  EncoderConfig config_;
  std::array<nn::Conv2d, 6> convs_;
};

}  // namespace hybridgait
