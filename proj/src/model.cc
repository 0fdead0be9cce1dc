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

#include "hybridgait/model.h"

namespace hybridgait {

using nn::Tensor;
using nlohmann::json;

Variant parse_variant(const std::string& name) {
  if (name == "appr") return Variant::kAppr;
  if (name == "appr+stt") return Variant::kApprStt;
  if (name == "appr+castt") return Variant::kApprCastt;
  if (name == "full") return Variant::kFull;
  throw ConfigError("unknown model variant '" + name + "' (expected appr, appr+stt, appr+castt or full)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kAppr: return "appr";
    case Variant::kApprStt: return "appr+stt";
    case Variant::kApprCastt: return "appr+castt";
    case Variant::kFull: return "full";
  }
  return "full";
}

void ModelConfig::validate() const {
  for (int c : encoder.channels) {
    if (c < 1) throw ConfigError("model.encoder_channels must be positive");
  }
  if (temporal.channels < 1 || temporal.heads < 1 || temporal.channels % temporal.heads != 0) {
    throw ConfigError("model.temporal_channels must be a positive multiple of model.temporal_heads");
  }
  if (temporal.k_neighbors < 1 || temporal.k_neighbors > kSmplJointCount) {
    throw ConfigError("model.k_neighbors must lie in [1, 24]");
  }
  if (temporal.max_frames < 1) throw ConfigError("model.max_frames must be positive");
  if (sild_kernel < 1 || sild_kernel % 2 == 0) throw ConfigError("model.sild_kernel must be odd");
  if (parts < 1 || kFeatureSize % parts != 0) throw ConfigError("model.parts must divide 16");
  if (part_dim < 1) throw ConfigError("model.part_dim must be positive");
  if (num_ids < 1) throw ConfigError("model.num_ids must be positive");
}

json to_json(const ModelConfig& c) {
  return json{{"variant", variant_name(c.variant)},
              {"encoder_channels", c.encoder.channels},
              {"leaky_slope", c.encoder.leaky_slope},
              {"temporal_channels", c.temporal.channels},
              {"temporal_heads", c.temporal.heads},
              {"temporal_ff_dim", c.temporal.ff_dim},
              {"spatial_layers", c.temporal.spatial_layers},
              {"temporal_layers", c.temporal.temporal_layers},
              {"max_frames", c.temporal.max_frames},
              {"k_neighbors", c.temporal.k_neighbors},
              {"canonical_H", c.temporal.canonical_H},
              {"canonical_W", c.temporal.canonical_W},
              {"sild_kernel", c.sild_kernel},
              {"parts", c.parts},
              {"part_dim", c.part_dim},
              {"num_ids", c.num_ids},
              {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model: expected an object");
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "variant") c.variant = parse_variant(value.get<std::string>());
      else if (key == "encoder_channels") {
        auto v = value.get<std::vector<int>>();
        if (v.size() != 3) throw ConfigError("model.encoder_channels must list three stages");
        std::copy(v.begin(), v.end(), c.encoder.channels.begin());
      } else if (key == "leaky_slope") c.encoder.leaky_slope = value.get<Real>();
      else if (key == "temporal_channels") c.temporal.channels = value.get<int>();
      else if (key == "temporal_heads") c.temporal.heads = value.get<int>();
      else if (key == "temporal_ff_dim") c.temporal.ff_dim = value.get<int>();
      else if (key == "spatial_layers") c.temporal.spatial_layers = value.get<int>();
      else if (key == "temporal_layers") c.temporal.temporal_layers = value.get<int>();
      else if (key == "max_frames") c.temporal.max_frames = value.get<int>();
      else if (key == "k_neighbors") c.temporal.k_neighbors = value.get<int>();
      else if (key == "canonical_H") c.temporal.canonical_H = value.get<int>();
      else if (key == "canonical_W") c.temporal.canonical_W = value.get<int>();
      else if (key == "sild_kernel") c.sild_kernel = value.get<int>();
      else if (key == "parts") c.parts = value.get<int>();
      else if (key == "part_dim") c.part_dim = value.get<int>();
      else if (key == "num_ids") c.num_ids = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("model: unknown field '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("model." + key + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

HybridGaitModel::HybridGaitModel(const ModelConfig& config, const Skeleton& skeleton) : config_(config) {
  config_.validate();
  config_.temporal.grid = kFeatureSize;
  config_.temporal.mapping = config_.variant == Variant::kApprStt ? JointToGrid::kLearnedLinear
                                                                  : JointToGrid::kCanonical;
  nn::Rng rng(config_.seed);
  const int c = config_.encoder.channels[2];
  appearance_ = AppearanceEncoder(store_, "appearance", config_.encoder, rng);
  if (config_.variant != Variant::kAppr) {
    temporal_ = std::make_unique<TemporalBranch>(store_, "temporal", config_.temporal, skeleton, rng);
  }
  if (config_.variant == Variant::kFull) {
    projection_ = std::make_unique<AppearanceEncoder>(store_, "projection", config_.encoder, rng);
    sild_ = std::make_unique<SilhouetteGuidedDeformation>(store_, "sild", c, config_.sild_kernel, rng);
  }
  hpp_ = HorizontalPyramidPooling(store_, "hpp", c, config_.parts, config_.part_dim, rng);
  classifier_ = PartClassifier(store_, "classifier", config_.parts, config_.part_dim, config_.num_ids, rng);
}

Tensor HybridGaitModel::fused_maps(const Tensor& sils, const Tensor& proj, const Tensor& poses) const {
  if (sils.ndim() != 4) throw ValidationError("model: silhouettes must be [B,T,64,64], got " + nn::shape_str(sils.shape()));
  const int b = sils.dim(0), t = sils.dim(1);
  const nn::Shape frames{b * t, sils.dim(2), sils.dim(3)};
  Tensor f = appearance_.encode(nn::reshape(sils, frames));
  Tensor f_t, f_pro;
  if (temporal_) {
    if (!poses.defined() || poses.ndim() != 4 || poses.dim(0) != b || poses.dim(1) != t) {
      throw ValidationError("model: poses must be [B,T,24,3] matching the silhouettes");
    }
    f_t = temporal_->forward(poses);
  }
  if (sild_) {
    if (!proj.defined() || proj.shape() != sils.shape()) {
      throw ValidationError("model: projected silhouettes must match the capture silhouettes");
    }
    f_pro = sild_->forward(f, projection_->encode(nn::reshape(proj, frames)));
  }
  return fuse(f, f_t, f_pro);
}

ModelOutput HybridGaitModel::forward(const Tensor& sils, const Tensor& proj, const Tensor& poses) const {
  Tensor fhat = fused_maps(sils, proj, poses);
  const int b = sils.dim(0), t = sils.dim(1);
  Tensor pooled = set_pool(nn::reshape(fhat, {b, t, fhat.dim(1), fhat.dim(2), fhat.dim(3)}));
  ModelOutput out;
  out.parts = hpp_(pooled);
  out.logits = classifier_(out.parts);
  return out;
}

std::unique_ptr<HybridGaitModel> build_ablation_variant(const std::string& name, ModelConfig config,
                                                        const Skeleton& skeleton) {
  config.variant = parse_variant(name);
  return std::make_unique<HybridGaitModel>(config, skeleton);
}

}  // namespace hybridgait
