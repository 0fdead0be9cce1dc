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

#include <cstdlib>
#include <filesystem>
#include <string>

#include "hybridgait/dataio.h"
#include "hybridgait/model.h"

namespace hybridgait {

inline std::filesystem::path test_data_dir() { return HGAIT_TEST_DATA_DIR; }

/// Empty directory under the build tree, wiped on every call. The
/// HGAIT_TEST_SCRATCH environment variable overrides the root so that test
/// processes running in parallel do not share directories.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* env = std::getenv("HGAIT_TEST_SCRATCH");
  const auto dir = std::filesystem::path(env && *env ? env : HGAIT_TEST_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// 6 identities x 4 sequences x 12 frames, 3 for training, projected at 0.
inline SynthConfig small_synth_config() {
  SynthConfig c;
  c.num_identities = 6;
  c.sequences_per_identity = 4;
  c.frames_per_sequence = 12;
  c.num_train_identities = 3;
  c.queries_per_identity = 1;
  c.max_start_frame = 8;
  return c;
}

/// Generated once per process.
inline DatasetIndex& small_dataset() {
  static DatasetIndex index = [] {
    DatasetIndex idx = generate_synthetic_dataset(small_synth_config(), 17, scratch_dir("small_dataset"));
    precompute_projections(idx, 0.0);
    return idx;
  }();
  return index;
}

/// Narrow network that keeps every branch but runs in milliseconds.
inline ModelConfig tiny_model_config(Variant v, int num_ids) {
  ModelConfig c;
  c.variant = v;
  c.encoder.channels = {4, 8, 8};
  c.temporal.channels = 8;
  c.temporal.heads = 2;
  c.temporal.ff_dim = 16;
  c.temporal.spatial_layers = 1;
  c.temporal.temporal_layers = 1;
  c.temporal.max_frames = 64;
  c.parts = 4;
  c.part_dim = 8;
  c.num_ids = num_ids;
  c.seed = 5;
  return c;
}

}  // namespace hybridgait
