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

// Independent reference implementations shared by the unit tests and the
// acceptance runner. Nothing here calls into the code it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hybridgait/fusion_head.h"
#include "hybridgait/retrieval_eval.h"
#include "hybridgait/temporal_branch.h"

namespace hybridgait::testing {

using nn::Tensor;

inline Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, Real lo = -1, Real hi = 1, bool grad = false) {
  std::uniform_real_distribution<Real> u(lo, hi);
  std::vector<Real> v(nn::shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

inline Real max_abs_diff(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) return INFINITY;
  Real m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Alignment by full sort of all joint distances per region.
inline std::vector<std::uint8_t> alignment_oracle(const CanonicalLayout& layout, int rows, int cols, int k) {
  const int J = layout.num_joints();
  std::vector<std::uint8_t> omega(static_cast<size_t>(rows) * cols * J, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::vector<std::pair<double, int>> d;
      for (int j = 0; j < J; ++j) {
        const double y = static_cast<double>(layout.coords[j].first) * rows / layout.H;
        const double x = static_cast<double>(layout.coords[j].second) * cols / layout.W;
        d.emplace_back((y - r) * (y - r) + (x - c) * (x - c), j);
      }
      std::sort(d.begin(), d.end());
      for (int i = 0; i < k; ++i) omega[(static_cast<size_t>(r) * cols + c) * J + d[i].second] = 1;
    }
  return omega;
}

/// Layout of `J` distinct random cells on an H x W grid.
inline CanonicalLayout random_layout(int J, int H, int W, std::mt19937_64& rng) {
  std::vector<int> cells((H + 1) * (W + 1));
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  CanonicalLayout l;
  l.H = H;
  l.W = W;
  for (int j = 0; j < J; ++j) l.coords.emplace_back(cells[j] / (W + 1), cells[j] % (W + 1));
  return l;
}

/// tokens [N, J, C] -> [N, C, rows, cols] by explicit loops over (i, r, j).
inline std::vector<Real> canonical_align_oracle(const Tensor& tokens, const std::vector<std::uint8_t>& omega, int rows,
                                                int cols) {
  const int N = tokens.dim(0), J = tokens.dim(1), C = tokens.dim(2);
  std::vector<Real> out(static_cast<size_t>(N) * C * rows * cols, 0);
  for (int i = 0; i < N; ++i)
    for (int r = 0; r < rows * cols; ++r) {
      int count = 0;
      for (int j = 0; j < J; ++j) count += omega[static_cast<size_t>(r) * J + j];
      for (int c = 0; c < C; ++c) {
        Real s = 0;
        for (int j = 0; j < J; ++j) {
          if (omega[static_cast<size_t>(r) * J + j]) s += tokens[(static_cast<size_t>(i) * J + j) * C + c];
        }
        out[(static_cast<size_t>(i) * C + c) * rows * cols + r] = s / count;
      }
    }
  return out;
}

/// F[i,c] @ Ft[i] + Fpro[i,c] with scalar loops.
inline std::vector<Real> fuse_oracle(const Tensor& f, const Tensor& ft, const Tensor& fpro) {
  const int N = f.dim(0), C = f.dim(1), h = f.dim(2);
  std::vector<Real> out(f.numel(), 0);
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < C; ++c)
      for (int a = 0; a < h; ++a)
        for (int b = 0; b < h; ++b) {
          const size_t o = ((static_cast<size_t>(i) * C + c) * h + a) * h + b;
          Real s = fpro[o];
          for (int m = 0; m < h; ++m) {
            s += f[((static_cast<size_t>(i) * C + c) * h + a) * h + m] * ft[(static_cast<size_t>(i) * h + m) * h + b];
          }
          out[o] = s;
        }
  return out;
}

struct OracleMetrics {
  double rank1 = 0, rank5 = 0, mAP = 0, mINP = 0;
  std::vector<double> ap, inp;
};

/// Recomputes every retrieval metric by sorting (distance, id) pairs and
/// counting matches in the sorted list.
inline OracleMetrics metrics_oracle(const EmbeddingSet& q, const EmbeddingSet& g) {
  OracleMetrics m;
  for (int i = 0; i < q.size(); ++i) {
    std::vector<std::pair<double, std::string>> ranked;
    std::vector<std::string> ids;
    for (int j = 0; j < g.size(); ++j) {
      double s = 0;
      for (int d = 0; d < q.dim; ++d) s += std::pow(q.row(i)[d] - g.row(j)[d], 2);
      ranked.emplace_back(std::sqrt(s), g.sequence_ids[j]);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<bool> hit;
    for (const auto& [dist, seq] : ranked) {
      const auto it = std::find(g.sequence_ids.begin(), g.sequence_ids.end(), seq);
      hit.push_back(g.identities[it - g.sequence_ids.begin()] == q.identities[i]);
    }
    const long total = std::count(hit.begin(), hit.end(), true);
    double ap = 0;
    long seen = 0, last = 0;
    for (size_t r = 0; r < hit.size(); ++r) {
      if (!hit[r]) continue;
      ++seen;
      ap += static_cast<double>(seen) / static_cast<double>(r + 1);
      last = static_cast<long>(r + 1);
    }
    ap /= static_cast<double>(total);
    const double inp = static_cast<double>(total) / static_cast<double>(last);
    m.ap.push_back(ap);
    m.inp.push_back(inp);
    m.mAP += ap;
    m.mINP += inp;
    m.rank1 += hit[0] ? 1 : 0;
    m.rank5 += std::any_of(hit.begin(), hit.begin() + std::min<size_t>(5, hit.size()), [](bool b) { return b; }) ? 1 : 0;
  }
  const double n = q.size();
  m.rank1 /= n;
  m.rank5 /= n;
  m.mAP /= n;
  m.mINP /= n;
  return m;
}

/// Random query/gallery pair where every query identity appears in the
/// gallery. Distinct sequence ids; coordinates drawn from a small lattice
/// half of the time so that distance ties occur.
inline std::pair<EmbeddingSet, EmbeddingSet> random_retrieval_problem(std::mt19937_64& rng, int dim = 8) {
  std::uniform_int_distribution<int> nid(2, 6), nq(1, 8), ng_extra(0, 12), pick(0, 1 << 20);
  const int ids = nid(rng);
  const bool lattice = pick(rng) % 2 == 0;
  std::normal_distribution<Real> gauss(0, 1);
  std::uniform_int_distribution<int> lat(-1, 1);
  auto vec = [&] {
    std::vector<Real> v(dim);
    for (auto& x : v) x = lattice ? lat(rng) : gauss(rng);
    return v;
  };
  auto id_name = [](int i) { return "id" + std::to_string(i); };
  EmbeddingSet q, g;
  q.dim = g.dim = dim;
  int seq = 0;
  for (int i = 0; i < ids; ++i) g.add(vec(), id_name(i), "g" + std::to_string(seq++));
  const int extra = ng_extra(rng);
  for (int i = 0; i < extra; ++i) g.add(vec(), id_name(pick(rng) % ids), "g" + std::to_string(seq++));
  const int queries = nq(rng);
  for (int i = 0; i < queries; ++i) q.add(vec(), id_name(pick(rng) % ids), "q" + std::to_string(i));
  return {q, g};
}

/// Relative error ||a - n|| / max(||a||, ||n||) between the analytic
/// gradient of `loss` w.r.t. each input and central differences, maximized
/// over the inputs. `loss` must rebuild its graph from the inputs' values.
inline double gradient_check(const std::function<Tensor()>& loss, const std::vector<Tensor>& inputs, double h = 1e-6) {
  for (Tensor t : inputs) t.zero_grad();
  loss().backward();
  double worst = 0;
  for (const auto& t0 : inputs) {
    Tensor t = t0;
    std::vector<Real> analytic(t.numel(), 0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    std::vector<Real> numeric(t.numel());
    {
      nn::NoGradGuard guard;
      for (size_t i = 0; i < t.numel(); ++i) {
        const Real x = t.vec()[i];
        t.vec()[i] = x + h;
        const Real up = loss().item();
        t.vec()[i] = x - h;
        const Real down = loss().item();
        t.vec()[i] = x;
        numeric[i] = (up - down) / (2 * h);
      }
    }
    double diff = 0, na = 0, nn_ = 0;
    for (size_t i = 0; i < analytic.size(); ++i) {
      diff += std::pow(analytic[i] - numeric[i], 2);
      na += analytic[i] * analytic[i];
      nn_ += numeric[i] * numeric[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn_), 1e-12});
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

/// sum(out * R) for a fixed random R, so every output element matters.
inline Tensor random_projection(const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return nn::sum_all(nn::mul(out, random_tensor(out.shape(), rng)));
}

}  // namespace hybridgait::testing
