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

#include "hybridgait/retrieval_eval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace hybridgait {

namespace fs = std::filesystem;
using nlohmann::json;

void EmbeddingSet::add(const std::vector<Real>& v, const std::string& identity, const std::string& sequence_id) {
  if (dim == 0) dim = static_cast<int>(v.size());
  if (static_cast<int>(v.size()) != dim) {
    throw ValidationError("embedding of " + sequence_id + " has dimension " + std::to_string(v.size()) +
                          ", expected " + std::to_string(dim));
  }
  vectors.insert(vectors.end(), v.begin(), v.end());
  identities.push_back(identity);
  sequence_ids.push_back(sequence_id);
}

void EmbeddingSet::validate() const {
  if (vectors.size() != static_cast<size_t>(size()) * dim || sequence_ids.size() != identities.size()) {
    throw ValidationError("embedding set sizes are inconsistent");
  }
  for (int i = 0; i < size(); ++i) {
    if (identities[i].empty()) throw ValidationError("embedding " + sequence_ids[i] + " has an empty identity");
  }
  for (Real x : vectors) {
    if (!std::isfinite(x)) throw ValidationError("embedding set contains non-finite values");
  }
}

std::vector<Real> embed_sequence(const HybridGaitModel& model, const SequenceData& data) {
  nn::NoGradGuard guard;
  const Batch b = sequence_batch(data, "");
  const nn::Tensor proj = model.uses_projection() ? b.projections : nn::Tensor();
  const nn::Tensor poses = model.uses_pose() ? b.poses : nn::Tensor();
  std::vector<Real> v = model.forward(b.silhouettes, proj, poses).parts.vec();
  Real norm = 0;
  for (Real x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (Real& x : v) x /= norm;
  }
  return v;
}

EmbeddingSet extract_embeddings(const HybridGaitModel& model, const DatasetIndex& index,
                                const std::vector<const SequenceEntry*>& entries, const std::string& role) {
  if (entries.empty()) throw ValidationError("extract_embeddings: split '" + role + "' is empty");
  EmbeddingSet set;
  set.role = role;
  for (const auto* e : entries) {
    const SequenceData data = load_sequence(index, *e, model.uses_projection());
    set.add(embed_sequence(model, data), e->identity, e->key());
  }
  return set;
}

EmbeddingSet extract_embeddings(const HybridGaitModel& model, const DatasetIndex& index, Split split) {
  return extract_embeddings(model, index, index.split(split), split_name(split));
}

std::vector<Real> distance_matrix(const EmbeddingSet& query, const EmbeddingSet& gallery) {
  if (query.size() > 0 && gallery.size() > 0 && query.dim != gallery.dim) {
    throw ValidationError("distance_matrix: query dimension " + std::to_string(query.dim) +
                          " vs gallery dimension " + std::to_string(gallery.dim));
  }
  std::vector<Real> d(static_cast<size_t>(query.size()) * gallery.size());
  for (int i = 0; i < query.size(); ++i)
    for (int j = 0; j < gallery.size(); ++j) {
      const Real* a = query.row(i);
      const Real* b = gallery.row(j);
      Real s = 0;
      for (int k = 0; k < query.dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      d[static_cast<size_t>(i) * gallery.size() + j] = std::sqrt(s);
    }
  return d;
}

MetricsReport evaluate(const EmbeddingSet& query, const EmbeddingSet& gallery) {
  query.validate();
  gallery.validate();
  if (query.size() == 0) throw ValidationError("evaluate: empty query set");
  if (gallery.size() == 0) throw ValidationError("evaluate: empty gallery set");
  const std::set<std::string> gallery_seqs(gallery.sequence_ids.begin(), gallery.sequence_ids.end());
  const std::set<std::string> gallery_ids(gallery.identities.begin(), gallery.identities.end());
  for (int i = 0; i < query.size(); ++i) {
    if (gallery_seqs.count(query.sequence_ids[i])) {
      throw ValidationError("evaluate: sequence " + query.sequence_ids[i] + " is in both query and gallery");
    }
    if (!gallery_ids.count(query.identities[i])) {
      throw ValidationError("evaluate: query identity " + query.identities[i] + " has no gallery match");
    }
  }
  const auto dist = distance_matrix(query, gallery);
  const int ng = gallery.size();
  MetricsReport report;
  std::vector<int> order(ng);
  for (int q = 0; q < query.size(); ++q) {
    const Real* dq = dist.data() + static_cast<size_t>(q) * ng;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (dq[a] != dq[b]) return dq[a] < dq[b];
      return gallery.sequence_ids[a] < gallery.sequence_ids[b];
    });
    QueryResult r;
    r.sequence_id = query.sequence_ids[q];
    r.identity = query.identities[q];
    Real precision_sum = 0;
    for (int rank = 1; rank <= ng; ++rank) {
      const int g = order[rank - 1];
      if (rank <= 5) r.top5.push_back(gallery.sequence_ids[g]);
      if (gallery.identities[g] != r.identity) continue;
      ++r.num_relevant;
      if (r.first_hit_rank == 0) r.first_hit_rank = rank;
      r.last_hit_rank = rank;
      precision_sum += static_cast<Real>(r.num_relevant) / rank;
    }
    r.ap = precision_sum / r.num_relevant;
    r.inp = static_cast<Real>(r.num_relevant) / r.last_hit_rank;
    report.rank1 += r.first_hit_rank == 1;
    report.rank5 += r.first_hit_rank <= 5;
    report.mAP += r.ap;
    report.mINP += r.inp;
    report.per_query.push_back(std::move(r));
  }
  const Real nq = query.size();
  report.rank1 /= nq;
  report.rank5 /= nq;
  report.mAP /= nq;
  report.mINP /= nq;
  return report;
}

json metrics_json(const MetricsReport& r) {
  return json{{"rank1", r.rank1}, {"rank5", r.rank5}, {"mAP", r.mAP}, {"mINP", r.mINP}};
}

json report_to_json(const MetricsReport& r) {
  json rows = json::array();
  for (const auto& q : r.per_query) {
    rows.push_back(json{{"sequence_id", q.sequence_id},
                        {"identity_id", q.identity},
                        {"num_relevant", q.num_relevant},
                        {"first_hit_rank", q.first_hit_rank},
                        {"last_hit_rank", q.last_hit_rank},
                        {"ap", q.ap},
                        {"inp", q.inp},
                        {"top5", q.top5}});
  }
  return json{{"format_version", kReportFormatVersion}, {"metrics", metrics_json(r)}, {"per_query", rows}};
}

void write_report(const MetricsReport& r, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << report_to_json(r).dump(2) << "\n";
}

void write_embeddings(const EmbeddingSet& set, const fs::path& path) {
  set.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << json{{"format_version", kEmbeddingFormatVersion}, {"dim", set.dim}, {"role", set.role}, {"count", set.size()}}
             .dump()
      << "\n";
  for (int i = 0; i < set.size(); ++i) {
    out << json{{"sequence_id", set.sequence_ids[i]},
                {"identity_id", set.identities[i]},
                {"role", set.role},
                {"embedding", std::vector<Real>(set.row(i), set.row(i) + set.dim)}}
               .dump()
        << "\n";
  }
  if (!out) throw DataError("write failed for " + path.string());
}

EmbeddingSet read_embeddings(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read embeddings " + path.string());
  EmbeddingSet set;
  std::string line;
  int lineno = 0;
  try {
    if (!std::getline(in, line)) throw DataError("empty embedding file");
    ++lineno;
    const json header = json::parse(line);
    if (header.at("format_version").get<int>() != kEmbeddingFormatVersion) {
      throw DataError("unsupported embedding format_version");
    }
    set.dim = header.at("dim").get<int>();
    set.role = header.value("role", "");
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json row = json::parse(line);
      set.add(row.at("embedding").get<std::vector<Real>>(), row.at("identity_id").get<std::string>(),
              row.at("sequence_id").get<std::string>());
    }
  } catch (const std::exception& e) {
    throw DataError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
  }
  set.validate();
  return set;
}

}  // namespace hybridgait
