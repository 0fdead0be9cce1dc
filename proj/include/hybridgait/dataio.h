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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hybridgait/tensor.h"
#include "hybridgait/skeleton.h"

namespace hybridgait {

inline constexpr int kManifestFormatVersion = 1;

/// Procedural walking dataset. Sequence s of every identity is captured at
/// views[s % views.size()]; clothing levels are drawn per sequence.
struct SynthConfig {
  int num_identities = 16;
  int sequences_per_identity = 6;
  int frames_per_sequence = 60;
  std::vector<double> views{0.0, 90.0};
  std::vector<int> clothing_levels{0, 1, 2, 3};  // dilation radius in pixels
  double boundary_flip = 0.02;                   // applied when the level is > 0
  int image_size = 64;
  double fps = 12.5;
  int max_start_frame = 24;  // per-sequence gait phase, in frames
  int num_train_identities = 8;
  double query_view = 90.0;
  int queries_per_identity = 2;
  /// Sequences of test identities captured at the query view but not picked
  /// as queries are left out of the gallery (split "unused").
  bool gallery_excludes_query_view = true;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
SynthConfig synth_config_from_json(const nlohmann::json& j);

enum class Split { kTrain, kQuery, kGallery, kUnused };
std::string split_name(Split s);
Split parse_split(const std::string& s);

struct SequenceEntry {
  std::string identity;
  std::string sequence;
  std::string view_tag;
  std::string clothing_tag;
  std::string path;  // relative to the dataset root
  int num_frames = 0;
  Split split = Split::kTrain;
  double view_deg = 0;
  int clothing_level = 0;
  int start_frame = 0;  // gait phase of frame 0, in frames

  /// Globally unique "<identity>/<sequence>".
  std::string key() const { return identity + "/" + sequence; }
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<SequenceEntry> entries;
  int image_size = 64;
  std::optional<double> projection_view;  // set once projections exist
  nlohmann::json manifest;                // raw manifest as loaded

  std::vector<const SequenceEntry*> split(Split s) const;
  /// Sorted identity ids of the training split; labels index this list.
  std::vector<std::string> train_identities() const;
  void validate() const;
};

/// Writes the dataset (silhouettes, poses, skeleton.json, manifest.json)
/// under `root` and returns its index. Deterministic in (config, seed).
DatasetIndex generate_synthetic_dataset(const SynthConfig& config, std::uint64_t seed,
                                        const std::filesystem::path& root);

/// Reads root/manifest.json and checks every sequence directory.
DatasetIndex load_dataset(const std::filesystem::path& root);

void save_manifest(const DatasetIndex& index);

SmplPoseSequence read_pose_file(const std::filesystem::path& path);
void write_pose_file(const SmplPoseSequence& seq, const std::filesystem::path& path);

/// Skeleton used for fixed-view projection (root/skeleton.json).
Skeleton dataset_skeleton(const DatasetIndex& index);

struct ProjectionReport {
  int written = 0;     // sequences (re)projected
  bool up_to_date = false;
};

/// Renders every pose frame at `view_angle_deg` into <seq>/proj and records
/// the view in the manifest. Skips work when the manifest already records
/// this view and all outputs exist. On error, the partial outputs of the
/// failing sequence are removed and DataError names it.
ProjectionReport precompute_projections(DatasetIndex& index, double view_angle_deg, bool force = false,
                                        const std::function<void(const SequenceEntry&)>& progress = {});

/// In-memory copy of one sequence.
struct SequenceData {
  std::vector<Mask> silhouettes;
  std::vector<Mask> projections;  // empty if not loaded
  SmplPoseSequence pose;
  int num_frames() const { return static_cast<int>(silhouettes.size()); }
};

SequenceData load_sequence(const DatasetIndex& index, const SequenceEntry& entry, bool with_projections);

/// Lazily loads and caches sequences by key. Thread-safe.
class SequenceCache {
 public:
  explicit SequenceCache(const DatasetIndex& index, bool with_projections)
      : index_(&index), with_projections_(with_projections) {}
  std::shared_ptr<const SequenceData> get(const SequenceEntry& entry);

 private:
  const DatasetIndex* index_;
  bool with_projections_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const SequenceData>> cache_;
};

struct Batch {
  nn::Tensor silhouettes;  // [P*K, T, 64, 64] in {0,1}
  nn::Tensor projections;  // same shape (zeros if projections are not loaded)
  nn::Tensor poses;        // [P*K, T, 24, 3]
  std::vector<int> labels;  // index into DatasetIndex::train_identities()
  std::vector<std::string> sequence_keys;
  std::vector<std::vector<int>> frame_indices;
};

/// Frames [start, start+T) of a length-n sequence, wrapping cyclically.
std::vector<int> window_frames(int n, int start, int T);

/// P distinct training identities, K sequences each (with replacement only
/// when an identity has fewer than K), a contiguous T-frame window each.
Batch sample_batch(const DatasetIndex& index, SequenceCache& cache, int P, int K, int T, std::mt19937_64& rng);

/// Tensors for a whole sequence: sils [1,N,64,64], proj, poses [1,N,24,3].
Batch sequence_batch(const SequenceData& data, const std::string& key);

}  // namespace hybridgait
