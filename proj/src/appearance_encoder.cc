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

#include "hybridgait/appearance_encoder.h"

namespace hybridgait {

AppearanceEncoder::AppearanceEncoder(nn::ParameterStore& store, const std::string& name, const EncoderConfig& config,
                                     nn::Rng& rng)
    : config_(config) {
  int in = 1;
  for (int stage = 0; stage < 3; ++stage) {
    const int c = config.channels[stage];
    if (c < 1) throw ValidationError("encoder channel counts must be positive");
    const std::string prefix = name + ".stage" + std::to_string(stage + 1);
    convs_[2 * stage] = nn::Conv2d(store, prefix + ".conv1", in, c, 3, config.bias, rng);
    convs_[2 * stage + 1] = nn::Conv2d(store, prefix + ".conv2", c, c, 3, config.bias, rng);
    in = c;
  }
}

nn::Tensor AppearanceEncoder::encode(const nn::Tensor& sils) const {
  nn::Tensor x = sils;
  if (x.ndim() == 3) x = nn::reshape(x, {x.dim(0), 1, x.dim(1), x.dim(2)});
  if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != kSilhouetteSize || x.dim(3) != kSilhouetteSize) {
    throw ValidationError("encode_silhouettes: expected [N,64,64] input, got " + nn::shape_str(sils.shape()));
  }
  for (Real v : x.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("encode_silhouettes: input values must lie in [0,1]");
  }
  for (int stage = 0; stage < 3; ++stage) {
    x = nn::leaky_relu(convs_[2 * stage](x), config_.leaky_slope);
    x = nn::leaky_relu(convs_[2 * stage + 1](x), config_.leaky_slope);
    if (stage < 2) x = nn::max_pool2x2(x);
  }
  return x;
}

}  // namespace hybridgait
