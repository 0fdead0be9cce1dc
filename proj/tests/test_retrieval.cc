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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "hybridgait/retrieval_eval.h"
#include "support/fixtures.h"
#include "support/oracles.h"

using namespace hybridgait;
namespace fs = std::filesystem;

namespace {

// One query at 0; gallery item i at distance i+1, relevant where flagged.
std::pair<EmbeddingSet, EmbeddingSet> ranked_problem(const std::vector<bool>& relevant) {
  EmbeddingSet q, g;
  q.add({0.0}, "A", "q0");
  for (size_t i = 0; i < relevant.size(); ++i) {
    g.add({static_cast<Real>(i + 1)}, relevant[i] ? "A" : "B" + std::to_string(i), "g" + std::to_string(i));
  }
  return {q, g};
}

EmbeddingSet permuted(const EmbeddingSet& s, const std::vector<int>& perm) {
  EmbeddingSet out;
  out.role = s.role;
  for (int i : perm) out.add(std::vector<Real>(s.row(i), s.row(i) + s.dim), s.identities[i], s.sequence_ids[i]);
  return out;
}

}  // namespace

TEST_SUITE("retrieval_eval") {

TEST_CASE("hand-enumerated rankings") {
  {
    auto [q, g] = ranked_problem({true, true, false, false, false});
    const MetricsReport r = evaluate(q, g);
    CHECK(r.mAP == 1.0);
    CHECK(r.mINP == 1.0);
    CHECK(r.rank1 == 1.0);
  }
  {
    auto [q, g] = ranked_problem({false, true, false, true, false});
    const MetricsReport r = evaluate(q, g);
    CHECK(r.mAP == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.mINP == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.rank1 == 0.0);
    CHECK(r.rank5 == 1.0);
    CHECK(r.per_query[0].first_hit_rank == 2);
    CHECK(r.per_query[0].last_hit_rank == 4);
    CHECK(r.per_query[0].top5 == std::vector<std::string>{"g0", "g1", "g2", "g3", "g4"});
  }
  {
    auto [q, g] = ranked_problem({false, false, false, false, false, true});
    const MetricsReport r = evaluate(q, g);
    CHECK(r.rank5 == 0.0);
    CHECK(r.mAP == doctest::Approx(1.0 / 6));
  }
}

TEST_CASE("INP can exceed AP for a single query") {
  auto [q, g] = ranked_problem({false, true, true, false});
  const MetricsReport r = evaluate(q, g);
  CHECK(r.mAP == doctest::Approx((1.0 / 2 + 2.0 / 3) / 2).epsilon(1e-15));
  CHECK(r.mINP == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(r.mINP > r.mAP);
}

TEST_CASE("random problems match the brute-force oracle") {
  std::mt19937_64 rng(61);
  for (int t = 0; t < 200; ++t) {
    auto [q, g] = testing::random_retrieval_problem(rng);
    const MetricsReport r = evaluate(q, g);
    const auto o = testing::metrics_oracle(q, g);
    CHECK(std::abs(r.rank1 - o.rank1) < 1e-9);
    CHECK(std::abs(r.rank5 - o.rank5) < 1e-9);
    CHECK(std::abs(r.mAP - o.mAP) < 1e-9);
    CHECK(std::abs(r.mINP - o.mINP) < 1e-9);
    CHECK(r.rank1 <= r.rank5);
    for (int i = 0; i < q.size(); ++i) {
      const auto& pq = r.per_query[i];
      CHECK(std::abs(pq.ap - o.ap[i]) < 1e-9);
      CHECK(std::abs(pq.inp - o.inp[i]) < 1e-9);
      // INP is the precision at the last hit; AP averages a set that contains it.
      CHECK(std::abs(pq.inp - static_cast<Real>(pq.num_relevant) / pq.last_hit_rank) < 1e-15);
      CHECK(pq.inp > 0.0);
      CHECK(pq.inp <= 1.0);
      CHECK((pq.inp == 1.0) == (pq.ap == 1.0));
    }
  }
}

TEST_CASE("gallery storage order does not matter") {
  std::mt19937_64 rng(62);
  for (int t = 0; t < 50; ++t) {
    auto [q, g] = testing::random_retrieval_problem(rng);
    std::vector<int> perm(g.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const MetricsReport a = evaluate(q, g);
    const MetricsReport b = evaluate(q, permuted(g, perm));
    CHECK(a.rank1 == b.rank1);
    CHECK(a.rank5 == b.rank5);
    CHECK(a.mAP == b.mAP);
    CHECK(a.mINP == b.mINP);
  }
}

TEST_CASE("moving a correct item to the front never hurts") {
  std::mt19937_64 rng(63);
  std::normal_distribution<Real> gauss(0, 1);
  for (int t = 0; t < 100; ++t) {
    EmbeddingSet q, g;
    std::vector<Real> v(4);
    for (auto& x : v) x = gauss(rng);
    q.add(v, "id0", "q");
    for (int i = 0; i < 10; ++i) {
      for (auto& x : v) x = gauss(rng);
      g.add(v, i % 3 == 0 ? "id0" : "id" + std::to_string(i), "g" + std::to_string(i));
    }
    const MetricsReport before = evaluate(q, g);
    const auto& pq = before.per_query[0];
    // Swap the vectors of the top item and the worst-ranked correct item.
    const auto dist = distance_matrix(q, g);
    const int top = static_cast<int>(std::min_element(dist.begin(), dist.end()) - dist.begin());
    int worst = -1;
    for (int i = 0; i < g.size(); ++i) {
      if (g.identities[i] == "id0" && (worst < 0 || dist[i] > dist[worst])) worst = i;
    }
    for (int d = 0; d < 4; ++d) std::swap(g.vectors[top * 4 + d], g.vectors[worst * 4 + d]);
    const MetricsReport after = evaluate(q, g);
    CHECK(after.rank1 >= before.rank1);
    CHECK(after.rank5 >= before.rank5);
    CHECK(after.mAP >= before.mAP);
    CHECK(after.mINP >= before.mINP);
    CHECK(after.rank1 == 1.0);
    CHECK(pq.num_relevant == after.per_query[0].num_relevant);
  }
}

TEST_CASE("distance matrix") {
  EmbeddingSet a, b;
  a.add({0.6, 0.8}, "x", "a0");
  b.add({0.6, 0.8}, "x", "b0");
  b.add({-0.6, -0.8}, "y", "b1");
  const auto d = distance_matrix(a, b);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == doctest::Approx(2.0).epsilon(1e-15));
  std::mt19937_64 rng(64);
  auto [q, g] = testing::random_retrieval_problem(rng, 5);
  const auto m = distance_matrix(q, g);
  for (int i = 0; i < q.size(); ++i)
    for (int j = 0; j < g.size(); ++j) {
      Real s = 0;
      for (int k = 0; k < 5; ++k) s += (q.row(i)[k] - g.row(j)[k]) * (q.row(i)[k] - g.row(j)[k]);
      CHECK(std::abs(m[i * g.size() + j] - std::sqrt(s)) < 1e-9);
    }
  EmbeddingSet c;
  c.add({1.0, 2.0, 3.0}, "z", "c0");
  CHECK_THROWS_AS(distance_matrix(a, c), ValidationError);
}

TEST_CASE("protocol errors") {
  auto [q, g] = ranked_problem({true, false});
  EmbeddingSet orphan;
  orphan.add({0.0}, "Nobody", "q9");
  CHECK_THROWS_WITH_AS(evaluate(orphan, g), doctest::Contains("Nobody"), ValidationError);
  EmbeddingSet overlap;
  overlap.add({0.0}, "A", "g1");
  CHECK_THROWS_WITH_AS(evaluate(overlap, g), doctest::Contains("g1"), ValidationError);
  CHECK_THROWS_AS(evaluate(EmbeddingSet{}, g), ValidationError);
  CHECK_THROWS_AS(q.add({1.0, 2.0}, "A", "q1"), ValidationError);
}

TEST_CASE("report and embedding files") {
  std::mt19937_64 rng(65);
  auto [q, g] = testing::random_retrieval_problem(rng);
  q.role = "query";
  const MetricsReport r = evaluate(q, g);
  const auto keys = metrics_json(r);
  CHECK(keys.size() == 4);
  for (const char* k : {"rank1", "rank5", "mAP", "mINP"}) CHECK(keys.contains(k));
  const auto doc = report_to_json(r);
  CHECK(doc.at("per_query").size() == static_cast<size_t>(q.size()));

  const fs::path dir = scratch_dir("retrieval_files");
  write_embeddings(q, dir / "q.jsonl");
  const EmbeddingSet back = read_embeddings(dir / "q.jsonl");
  CHECK(back.vectors == q.vectors);
  CHECK(back.identities == q.identities);
  CHECK(back.sequence_ids == q.sequence_ids);
  CHECK(back.role == "query");
  write_report(r, dir / "report.json");
  CHECK(fs::file_size(dir / "report.json") > 0);
  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << "{\"format_version\": 1, \"dim\": 2}\n{\"sequence_id\": \"a\"}\n";
  }
  CHECK_THROWS_AS(read_embeddings(dir / "bad.jsonl"), DataError);
}

TEST_CASE("extracted embeddings") {
  DatasetIndex& idx = small_dataset();
  HybridGaitModel model(tiny_model_config(Variant::kFull, 3), dataset_skeleton(idx));
  const EmbeddingSet a = extract_embeddings(model, idx, Split::kQuery);
  const EmbeddingSet b = extract_embeddings(model, idx, Split::kQuery);
  CHECK(a.vectors == b.vectors);
  CHECK(a.dim == 4 * 8);
  CHECK(a.size() == static_cast<int>(idx.split(Split::kQuery).size()));
  for (int i = 0; i < a.size(); ++i) {
    Real n = 0;
    for (int d = 0; d < a.dim; ++d) n += a.row(i)[d] * a.row(i)[d];
    CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(extract_embeddings(model, idx, {}, "query"), ValidationError);

  // A positive rescale of the part embeddings disappears after normalization.
  nn::Tensor w = model.hpp().weight;
  for (auto& v : w.vec()) v *= 3.5;
  const EmbeddingSet scaled = extract_embeddings(model, idx, Split::kQuery);
  CHECK(testing::max_abs_diff(scaled.vectors, a.vectors) < 1e-12);
}

TEST_CASE("a duplicated sequence embeds identically") {
  const fs::path root = scratch_dir("dup_seq");
  fs::copy(small_dataset().root, root, fs::copy_options::recursive);
  DatasetIndex idx = load_dataset(root);
  SequenceEntry copy = *idx.split(Split::kGallery).front();
  fs::copy(root / copy.path, root / copy.identity / "s99", fs::copy_options::recursive);
  copy.sequence = "s99";
  copy.path = copy.identity + "/s99";
  idx.entries.push_back(copy);
  save_manifest(idx);
  idx = load_dataset(root);
  HybridGaitModel model(tiny_model_config(Variant::kFull, 3), dataset_skeleton(idx));
  const auto& orig = *idx.split(Split::kGallery).front();
  const auto& dup = idx.entries.back();
  const EmbeddingSet e = extract_embeddings(model, idx, {&orig, &dup}, "gallery");
  CHECK(testing::max_abs_diff(std::span(e.row(0), e.dim), std::span(e.row(1), e.dim)) < 1e-7);
}

TEST_CASE("default configuration embeds to 4096 dimensions") {
  DatasetIndex& idx = small_dataset();
  ModelConfig cfg;
  cfg.variant = Variant::kAppr;
  cfg.num_ids = 3;
  HybridGaitModel model(cfg, dataset_skeleton(idx));
  const SequenceData data = load_sequence(idx, idx.entries[0], false);
  CHECK(embed_sequence(model, data).size() == 4096);
}

}  // TEST_SUITE
