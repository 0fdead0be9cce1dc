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
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hybridgait/dataio.h"
#include "hybridgait/model.h"

namespace hybridgait {

inline constexpr int kTrainConfigFormatVersion = 1;
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct TrainConfig {
  int P = 8;
  int K = 2;
  int T = 10;
  int epochs = 200;
  /// 0 means ceil(#training identities / P).
  int steps_per_epoch = 0;
  Real base_lr = 1e-3;
  std::vector<int> lr_milestones{150};
  Real lr_gamma = 0.1;
  Real weight_decay = 5e-4;
  Real adam_beta1 = 0.9;
  Real adam_beta2 = 0.999;
  Real adam_eps = 1e-8;
  Real alpha = 1.0;
  Real beta = 0.1;
  Real margin = 0.2;
  int k_neighbors = 7;
  Real view_angle_deg = 0.0;
  std::uint64_t seed = 0;
  std::string data_root;
  std::string out_dir;
  int checkpoint_every = 50;  // epochs; 0 = only the final checkpoint
  ModelConfig model;

  void validate() const;
  /// Batch 32 x 4 x 30, 1200 epochs, LR 1e-3 divided by 10 at 200 and 600.
  static TrainConfig published();
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError naming them.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

/// base_lr * gamma^(number of milestones <= epoch).
Real lr_at(int epoch, const TrainConfig& config);

/// Adaptive-moment optimizer with decoupled weight decay.
class AdamW {
 public:
  AdamW() = default;
  AdamW(const nn::ParameterStore& store, Real beta1, Real beta2, Real eps, Real weight_decay);
  void step(nn::ParameterStore& store, Real lr);

  std::int64_t t = 0;
  std::vector<std::vector<Real>> m, v;

 private:
  Real beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, weight_decay_ = 0;
};

struct StepRecord {
  std::int64_t step = 0;  // 1-based index of the finished step
  int epoch = 0;
  Real lr = 0;
  Real triplet = 0;
  Real ce = 0;
  Real total = 0;
};

nlohmann::json to_json(const StepRecord& r);

struct Checkpoint {
  TrainConfig config;
  std::string skeleton_json;
  std::int64_t step = 0;
  int epoch = 0;
  std::string rng_state;
  std::vector<std::string> names;
  std::vector<nn::Shape> shapes;
  std::vector<std::vector<Real>> values;
  std::int64_t adam_t = 0;
  std::vector<std::vector<Real>> adam_m, adam_v;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model stored in a checkpoint with its parameters.
std::unique_ptr<HybridGaitModel> model_from_checkpoint(const Checkpoint& ckpt);

class Trainer {
 public:
  /// Loads the dataset named by config.data_root.
  explicit Trainer(const TrainConfig& config);
  Trainer(const TrainConfig& config, const DatasetIndex& index);
  /// Continues a run from `ckpt` (config taken from the checkpoint).
  Trainer(const Checkpoint& ckpt, const DatasetIndex& index);

  StepRecord train_step();
  /// Runs until `epochs` are done (or `max_steps` more steps when > 0).
  /// Appends records to out_dir/metrics.jsonl and writes checkpoints when
  /// out_dir is set.
  std::vector<StepRecord> run(std::int64_t max_steps = 0, const std::function<void(const StepRecord&)>& on_step = {});

  Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const;

  HybridGaitModel& model() { return *model_; }
  const DatasetIndex& index() const { return index_; }
  const TrainConfig& config() const { return config_; }
  std::int64_t step() const { return step_; }
  int epoch() const { return static_cast<int>(step_ / steps_per_epoch_); }
  std::int64_t steps_per_epoch() const { return steps_per_epoch_; }
  std::int64_t total_steps() const { return steps_per_epoch_ * config_.epochs; }

 private:
  void init(const Skeleton& skeleton);

  TrainConfig config_;
  DatasetIndex index_;
  std::unique_ptr<HybridGaitModel> model_;
  std::unique_ptr<SequenceCache> cache_;
  AdamW optimizer_;
  std::mt19937_64 rng_;
  std::int64_t step_ = 0;
  std::int64_t steps_per_epoch_ = 1;
  std::string skeleton_json_;
};

}  // namespace hybridgait
