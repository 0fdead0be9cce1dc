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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hybridgait/dataio.h"
#include "hybridgait/model.h"

namespace hybridgait {

inline constexpr int kEmbeddingFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

struct EmbeddingSet {
  int dim = 0;
  std::vector<Real> vectors;  // size() x dim, row-major
  std::vector<std::string> identities;
  std::vector<std::string> sequence_ids;
  std::string role;  // "query", "gallery", ...

  int size() const { return static_cast<int>(identities.size()); }
  const Real* row(int i) const { return vectors.data() + static_cast<size_t>(i) * dim; }
  void add(const std::vector<Real>& v, const std::string& identity, const std::string& sequence_id);
  void validate() const;
};

/// Full-sequence inference per entry (every frame), flattened part
/// embeddings scaled to unit length.
EmbeddingSet extract_embeddings(const HybridGaitModel& model, const DatasetIndex& index,
                                const std::vector<const SequenceEntry*>& entries, const std::string& role);
EmbeddingSet extract_embeddings(const HybridGaitModel& model, const DatasetIndex& index, Split split);

/// Embedding of one sequence, flattened and L2-normalized.
std::vector<Real> embed_sequence(const HybridGaitModel& model, const SequenceData& data);

/// Row-major M_q x M_g Euclidean distances.
std::vector<Real> distance_matrix(const EmbeddingSet& query, const EmbeddingSet& gallery);

struct QueryResult {
  std::string sequence_id;
  std::string identity;
  int num_relevant = 0;
  int first_hit_rank = 0;  // 1-based
  int last_hit_rank = 0;
  Real ap = 0;
  Real inp = 0;
  std::vector<std::string> top5;  // gallery sequence ids
};

struct MetricsReport {
  Real rank1 = 0;
  Real rank5 = 0;
  Real mAP = 0;
  Real mINP = 0;
  std::vector<QueryResult> per_query;
};

/// Ranks the gallery for every query by ascending distance, ties by
/// gallery sequence id.
MetricsReport evaluate(const EmbeddingSet& query, const EmbeddingSet& gallery);

/// {"rank1","rank5","mAP","mINP"} only.
nlohmann::json metrics_json(const MetricsReport& r);
nlohmann::json report_to_json(const MetricsReport& r);
void write_report(const MetricsReport& r, const std::filesystem::path& path);

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_embeddings(const std::filesystem::path& path);

}  // namespace hybridgait
