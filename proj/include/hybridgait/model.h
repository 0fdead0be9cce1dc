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
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "hybridgait/appearance_encoder.h"
#include "hybridgait/fusion_head.h"
#include "hybridgait/projection_branch.h"
#include "hybridgait/temporal_branch.h"

namespace hybridgait {

enum class Variant { kAppr, kApprStt, kApprCastt, kFull };

/// "appr" | "appr+stt" | "appr+castt" | "full".
Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct ModelConfig {
  Variant variant = Variant::kFull;
  EncoderConfig encoder;
  TemporalConfig temporal;
  int sild_kernel = 3;
  int parts = 16;
  int part_dim = 256;
  int num_ids = 1;  // classifier width (training identities)
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);

struct ModelOutput {
  nn::Tensor parts;   // [B, parts, part_dim]
  nn::Tensor logits;  // [B, parts, num_ids]
};

/// The three-branch network with its head. Branches absent from the
/// configured variant are not built and their inputs are ignored.
class HybridGaitModel {
 public:
  HybridGaitModel(const ModelConfig& config, const Skeleton& skeleton);

  /// sils, proj: [B, T, 64, 64]; poses: [B, T, 24, 3].
  ModelOutput forward(const nn::Tensor& sils, const nn::Tensor& proj, const nn::Tensor& poses) const;

  /// Per-frame fused maps F_hat: [B*T, C, 16, 16].
  nn::Tensor fused_maps(const nn::Tensor& sils, const nn::Tensor& proj, const nn::Tensor& poses) const;

  bool uses_pose() const { return temporal_ != nullptr; }
  bool uses_projection() const { return sild_ != nullptr; }

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  const AppearanceEncoder& appearance() const { return appearance_; }
  const AppearanceEncoder* projection_encoder() const { return projection_.get(); }
  const TemporalBranch* temporal() const { return temporal_.get(); }
  const SilhouetteGuidedDeformation* sild() const { return sild_.get(); }
  const HorizontalPyramidPooling& hpp() const { return hpp_; }
  const PartClassifier& classifier() const { return classifier_; }

 private:
  ModelConfig config_;
  nn::ParameterStore store_;
  AppearanceEncoder appearance_;
  std::unique_ptr<AppearanceEncoder> projection_;
  std::unique_ptr<TemporalBranch> temporal_;
  std::unique_ptr<SilhouetteGuidedDeformation> sild_;
  HorizontalPyramidPooling hpp_;
  PartClassifier classifier_;
};

/// Variant-specific model built from an otherwise shared configuration.
std::unique_ptr<HybridGaitModel> build_ablation_variant(const std::string& name, ModelConfig config,
                                                        const Skeleton& skeleton);

}  // namespace hybridgait
