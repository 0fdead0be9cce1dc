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

#include "hybridgait/ops.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hybridgait::nn {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

int norm_axis(int axis, int ndim) {
  if (axis < 0) axis += ndim;
  if (axis < 0 || axis >= ndim) throw ValidationError("axis out of range");
  return axis;
}

// Strides of `in` viewed inside the broadcast output shape `out`
// (0 on broadcast axes).
std::vector<size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<size_t> strides(out.size(), 0);
  size_t stride = 1;
  const int off = static_cast<int>(out.size()) - static_cast<int>(in.size());
  for (int i = static_cast<int>(in.size()) - 1; i >= 0; --i) {
    if (in[i] != 1) strides[i + off] = stride;
    stride *= static_cast<size_t>(in[i]);
  }
  return strides;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const size_t n = std::max(a.size(), b.size());
  Shape out(n);
  for (size_t i = 0; i < n; ++i) {
    const int da = i < n - a.size() ? 1 : a[i - (n - a.size())];
    const int db = i < n - b.size() ? 1 : b[i - (n - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ValidationError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Calls f(out_index, a_offset, b_offset) over the broadcast output.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<size_t>& sa,
                        const std::vector<size_t>& sb, F&& f) {
  const size_t total = shape_numel(out);
  const int nd = static_cast<int>(out.size());
  std::vector<int> idx(nd, 0);
  size_t oa = 0, ob = 0;
  for (size_t i = 0; i < total; ++i) {
    f(i, oa, ob);
    for (int d = nd - 1; d >= 0; --d) {
      if (++idx[d] < out[d]) {
        oa += sa[d];
        ob += sb[d];
        break;
      }
      oa -= sa[d] * static_cast<size_t>(out[d] - 1);
      ob -= sb[d] * static_cast<size_t>(out[d] - 1);
      idx[d] = 0;
    }
  }
}

enum class BinOp { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
  if (a.shape() == b.shape()) {
    std::vector<Real> out(a.numel());
    const auto& x = a.vec();
    const auto& y = b.vec();
    for (size_t i = 0; i < out.size(); ++i) {
      out[i] = op == BinOp::kAdd ? x[i] + y[i] : op == BinOp::kSub ? x[i] - y[i] : x[i] * y[i];
    }
    return make_result(a.shape(), std::move(out), {a, b}, [a, b, op](TensorImpl& self) {
      const auto& g = self.grad;
      if (a.requires_grad()) {
        auto& ga = a.impl()->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += op == BinOp::kMul ? g[i] * b.vec()[i] : g[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.impl()->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) {
          gb[i] += op == BinOp::kMul ? g[i] * a.vec()[i] : op == BinOp::kSub ? -g[i] : g[i];
        }
      }
    });
  }
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  std::vector<Real> out(shape_numel(out_shape));
  const auto& x = a.vec();
  const auto& y = b.vec();
  for_each_broadcast(out_shape, sa, sb, [&](size_t i, size_t ia, size_t ib) {
    out[i] = op == BinOp::kAdd ? x[ia] + y[ib] : op == BinOp::kSub ? x[ia] - y[ib] : x[ia] * y[ib];
  });
  return make_result(out_shape, std::move(out), {a, b}, [a, b, op, out_shape, sa, sb](TensorImpl& self) {
    const auto& g = self.grad;
    std::vector<Real>* ga = a.requires_grad() ? &a.impl()->ensure_grad() : nullptr;
    std::vector<Real>* gb = b.requires_grad() ? &b.impl()->ensure_grad() : nullptr;
    for_each_broadcast(out_shape, sa, sb, [&](size_t i, size_t ia, size_t ib) {
      if (ga) (*ga)[ia] += op == BinOp::kMul ? g[i] * b.vec()[ib] : g[i];
      if (gb) (*gb)[ib] += op == BinOp::kMul ? g[i] * a.vec()[ia] : op == BinOp::kSub ? -g[i] : g[i];
    });
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<Real> out(x.numel());
  const auto& v = x.vec();
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(v[i]);
  return make_result(x.shape(), std::move(out), {x}, [x, deriv](TensorImpl& self) {
    auto& gx = x.impl()->ensure_grad();
    const auto& v = x.vec();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * deriv(v[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kMul); }

Tensor scale(const Tensor& a, Real s) {
  return unary(a, [s](Real v) { return v * s; }, [s](Real, Real) { return s; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](Real v) { return v > 0 ? v : 0.0; }, [](Real v, Real) { return v > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, Real slope) {
  return unary(
      x, [slope](Real v) { return v > 0 ? v : slope * v; },
      [slope](Real v, Real) { return v > 0 ? 1.0 : slope; });
}

Tensor gelu(const Tensor& x) {
  constexpr Real kInvSqrt2 = 0.70710678118654752440;
  const Real inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [](Real v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [inv_sqrt_2pi](Real v, Real) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](Real v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](Real, Real y) { return y * (1.0 - y); });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ValidationError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  return make_result(std::move(shape), x.vec(), {x}, [x](TensorImpl& self) {
    accumulate_grad(x, self.grad);
  });
}

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  const int nd = x.ndim();
  if (static_cast<int>(perm.size()) != nd) throw ValidationError("permute: rank mismatch");
  Shape out_shape(nd);
  std::vector<size_t> in_strides(nd), strides(nd);
  size_t st = 1;
  for (int d = nd - 1; d >= 0; --d) {
    in_strides[d] = st;
    st *= x.shape()[d];
  }
  std::vector<bool> used(nd, false);
  for (int d = 0; d < nd; ++d) {
    if (perm[d] < 0 || perm[d] >= nd || used[perm[d]]) throw ValidationError("permute: bad permutation");
    used[perm[d]] = true;
    out_shape[d] = x.shape()[perm[d]];
    strides[d] = in_strides[perm[d]];
  }
  std::vector<size_t> zero(nd, 0);
  std::vector<size_t> src_index(x.numel());
  for_each_broadcast(out_shape, strides, zero, [&](size_t i, size_t ia, size_t) { src_index[i] = ia; });
  std::vector<Real> out(x.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.vec()[src_index[i]];
  return make_result(out_shape, std::move(out), {x}, [x, src_index = std::move(src_index)](TensorImpl& self) {
    auto& gx = x.impl()->ensure_grad();
    for (size_t i = 0; i < src_index.size(); ++i) gx[src_index[i]] += self.grad[i];
  });
}

Tensor slice(const Tensor& x, int axis, int start, int length) {
  axis = norm_axis(axis, x.ndim());
  const int n = x.shape()[axis];
  if (start < 0 || length < 0 || start + length > n) {
    throw ValidationError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                          ") out of range for axis of size " + std::to_string(n));
  }
  size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= x.shape()[d];
  for (int d = axis + 1; d < x.ndim(); ++d) inner *= x.shape()[d];
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<Real> out(shape_numel(out_shape));
  for (size_t o = 0; o < outer; ++o) {
    std::copy_n(x.vec().begin() + (o * n + start) * inner, length * inner, out.begin() + o * length * inner);
  }
  return make_result(out_shape, std::move(out), {x}, [x, outer, inner, n, start, length](TensorImpl& self) {
    auto& gx = x.impl()->ensure_grad();
    for (size_t o = 0; o < outer; ++o)
      for (size_t i = 0; i < length * inner; ++i) gx[(o * n + start) * inner + i] += self.grad[o * length * inner + i];
  });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw ValidationError("concat of nothing");
  axis = norm_axis(axis, xs[0].ndim());
  Shape out_shape = xs[0].shape();
  out_shape[axis] = 0;
  for (const auto& t : xs) {
    if (t.ndim() != xs[0].ndim()) throw ValidationError("concat: rank mismatch");
    for (int d = 0; d < t.ndim(); ++d) {
      if (d != axis && t.shape()[d] != xs[0].shape()[d]) {
        throw ValidationError("concat: shape mismatch " + shape_str(t.shape()) + " vs " + shape_str(xs[0].shape()));
      }
    }
    out_shape[axis] += t.shape()[axis];
  }
  size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[d];
  for (int d = axis + 1; d < static_cast<int>(out_shape.size()); ++d) inner *= out_shape[d];
  const size_t out_row = out_shape[axis] * inner;
  std::vector<Real> out(shape_numel(out_shape));
  size_t offset = 0;
  std::vector<size_t> offsets;
  for (const auto& t : xs) {
    const size_t row = t.shape()[axis] * inner;
    for (size_t o = 0; o < outer; ++o) std::copy_n(t.vec().begin() + o * row, row, out.begin() + o * out_row + offset);
    offsets.push_back(offset);
    offset += row;
  }
  return make_result(out_shape, std::move(out), xs, [xs, offsets, outer, inner, out_row, axis](TensorImpl& self) {
    for (size_t k = 0; k < xs.size(); ++k) {
      if (!xs[k].requires_grad()) continue;
      auto& g = xs[k].impl()->ensure_grad();
      const size_t row = xs[k].shape()[axis] * inner;
      for (size_t o = 0; o < outer; ++o)
        for (size_t i = 0; i < row; ++i) g[o * row + i] += self.grad[o * out_row + offsets[k] + i];
    }
  });
}

Tensor sum_all(const Tensor& x) {
  Real s = 0;
  for (Real v : x.vec()) s += v;
  return make_result({}, {s}, {x}, [x](TensorImpl& self) {
    auto& gx = x.impl()->ensure_grad();
    for (auto& g : gx) g += self.grad[0];
  });
}

Tensor mean_all(const Tensor& x) {
  if (x.numel() == 0) throw ValidationError("mean of empty tensor");
  return scale(sum_all(x), 1.0 / static_cast<Real>(x.numel()));
}

namespace {

struct AxisSplit {
  size_t outer = 1, n = 1, inner = 1;
  Shape out_shape;
};

AxisSplit split_axis(const Shape& s, int axis) {
  AxisSplit r;
  for (int d = 0; d < static_cast<int>(s.size()); ++d) {
    if (d < axis) r.outer *= s[d];
    else if (d > axis) r.inner *= s[d];
    if (d != axis) r.out_shape.push_back(s[d]);
  }
  r.n = s[axis];
  return r;
}

}  // namespace

Tensor mean_axis(const Tensor& x, int axis) {
  axis = norm_axis(axis, x.ndim());
  const AxisSplit sp = split_axis(x.shape(), axis);
  if (sp.n == 0) throw ValidationError("mean over empty axis");
  std::vector<Real> out(sp.outer * sp.inner, 0.0);
  const Real inv = 1.0 / static_cast<Real>(sp.n);
  for (size_t o = 0; o < sp.outer; ++o)
    for (size_t k = 0; k < sp.n; ++k)
      for (size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += x.vec()[(o * sp.n + k) * sp.inner + i];
  for (auto& v : out) v *= inv;
  return make_result(sp.out_shape, std::move(out), {x}, [x, sp, inv](TensorImpl& self) {
    auto& gx = x.impl()->ensure_grad();
    for (size_t o = 0; o < sp.outer; ++o)
      for (size_t k = 0; k < sp.n; ++k)
        for (size_t i = 0; i < sp.inner; ++i) gx[(o * sp.n + k) * sp.inner + i] += self.grad[o * sp.inner + i] * inv;
  });
}

Tensor max_axis(const Tensor& x, int axis) {
  axis = norm_axis(axis, x.ndim());
  const AxisSplit sp = split_axis(x.shape(), axis);
  if (sp.n == 0) throw ValidationError("max over empty axis");
  std::vector<Real> out(sp.outer * sp.inner);
  std::vector<size_t> arg(out.size());
  for (size_t o = 0; o < sp.outer; ++o) {
    for (size_t i = 0; i < sp.inner; ++i) {
      size_t best = o * sp.n * sp.inner + i;
      for (size_t k = 1; k < sp.n; ++k) {
        const size_t idx = (o * sp.n + k) * sp.inner + i;
        if (x.vec()[idx] > x.vec()[best]) best = idx;
      }
      out[o * sp.inner + i] = x.vec()[best];
      arg[o * sp.inner + i] = best;
    }
  }
  return make_result(sp.out_shape, std::move(out), {x}, [x, arg = std::move(arg)](TensorImpl& self) {
    auto& gx = x.impl()->ensure_grad();
    for (size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += self.grad[i];
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.ndim() != 2) throw ValidationError("linear: weight must be 2-D");
  const int out_f = weight.shape()[0], in_f = weight.shape()[1];
  if (x.ndim() < 1 || x.shape().back() != in_f) {
    throw ValidationError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.ndim() != 1 || bias.shape()[0] != out_f)) {
    throw ValidationError("linear: bias shape " + shape_str(bias.shape()));
  }
  const size_t m = x.numel() / in_f;
  Shape out_shape = x.shape();
  out_shape.back() = out_f;
  std::vector<Real> out(m * out_f);
  CMapMat X(x.vec().data(), m, in_f);
  CMapMat Wm(weight.vec().data(), out_f, in_f);
  MapMat Y(out.data(), m, out_f);
  Y.noalias() = X * Wm.transpose();
  if (bias.defined()) {
    for (size_t r = 0; r < m; ++r)
      for (int c = 0; c < out_f; ++c) out[r * out_f + c] += bias.vec()[c];
  }
  return make_result(out_shape, std::move(out), {x, weight, bias}, [x, weight, bias, m, in_f, out_f](TensorImpl& self) {
    CMapMat G(self.grad.data(), m, out_f);
    if (x.requires_grad()) {
      MapMat GX(x.impl()->ensure_grad().data(), m, in_f);
      GX.noalias() += G * CMapMat(weight.vec().data(), out_f, in_f);
    }
    if (weight.requires_grad()) {
      MapMat GW(weight.impl()->ensure_grad().data(), out_f, in_f);
      GW.noalias() += G.transpose() * CMapMat(x.vec().data(), m, in_f);
    }
    if (bias.defined() && bias.requires_grad()) {
      auto& gb = bias.impl()->ensure_grad();
      for (size_t r = 0; r < m; ++r)
        for (int c = 0; c < out_f; ++c) gb[c] += self.grad[r * out_f + c];
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.shape()[0] != b.shape()[0]) {
    throw ValidationError("bmm: expected [B,m,k] x [B,k,n], got " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int batch = a.shape()[0];
  const int ar = a.shape()[1], ac = a.shape()[2], br = b.shape()[1], bc = b.shape()[2];
  const int m = transpose_a ? ac : ar, k = transpose_a ? ar : ac;
  const int k2 = transpose_b ? bc : br, n = transpose_b ? br : bc;
  if (k != k2) throw ValidationError("bmm: inner dimensions differ");
  std::vector<Real> out(static_cast<size_t>(batch) * m * n);
  for (int i = 0; i < batch; ++i) {
    CMapMat A(a.vec().data() + static_cast<size_t>(i) * ar * ac, ar, ac);
    CMapMat B(b.vec().data() + static_cast<size_t>(i) * br * bc, br, bc);
    MapMat C(out.data() + static_cast<size_t>(i) * m * n, m, n);
    if (transpose_a && transpose_b) C.noalias() = A.transpose() * B.transpose();
    else if (transpose_a) C.noalias() = A.transpose() * B;
    else if (transpose_b) C.noalias() = A * B.transpose();
    else C.noalias() = A * B;
  }
  return make_result({batch, m, n}, std::move(out), {a, b},
                     [a, b, batch, ar, ac, br, bc, m, n, transpose_a, transpose_b](TensorImpl& self) {
    for (int i = 0; i < batch; ++i) {
      CMapMat G(self.grad.data() + static_cast<size_t>(i) * m * n, m, n);
      CMapMat A(a.vec().data() + static_cast<size_t>(i) * ar * ac, ar, ac);
      CMapMat B(b.vec().data() + static_cast<size_t>(i) * br * bc, br, bc);
      if (a.requires_grad()) {
        MapMat GA(a.impl()->ensure_grad().data() + static_cast<size_t>(i) * ar * ac, ar, ac);
        // op(A) = G op(B)^T
        if (!transpose_a && !transpose_b) GA.noalias() += G * B.transpose();
        else if (!transpose_a && transpose_b) GA.noalias() += G * B;
        else if (transpose_a && !transpose_b) GA.noalias() += B * G.transpose();
        else GA.noalias() += B.transpose() * G.transpose();
      }
      if (b.requires_grad()) {
        MapMat GB(b.impl()->ensure_grad().data() + static_cast<size_t>(i) * br * bc, br, bc);
        if (!transpose_a && !transpose_b) GB.noalias() += A.transpose() * G;
        else if (transpose_a && !transpose_b) GB.noalias() += A * G;
        else if (!transpose_a && transpose_b) GB.noalias() += G.transpose() * A;
        else GB.noalias() += G.transpose() * A.transpose();
      }
    }
  });
}

Tensor softmax_last(const Tensor& x) {
  const int n = x.shape().back();
  const size_t rows = x.numel() / n;
  std::vector<Real> out(x.numel());
  for (size_t r = 0; r < rows; ++r) {
    const Real* in = x.vec().data() + r * n;
    Real* o = out.data() + r * n;
    const Real mx = *std::max_element(in, in + n);
    Real s = 0;
    for (int i = 0; i < n; ++i) s += (o[i] = std::exp(in[i] - mx));
    for (int i = 0; i < n; ++i) o[i] /= s;
  }
  return make_result(x.shape(), std::move(out), {x}, [x, n, rows](TensorImpl& self) {
    auto& gx = x.impl()->ensure_grad();
    for (size_t r = 0; r < rows; ++r) {
      const Real* y = self.data.data() + r * n;
      const Real* g = self.grad.data() + r * n;
      Real dot = 0;
      for (int i = 0; i < n; ++i) dot += g[i] * y[i];
      for (int i = 0; i < n; ++i) gx[r * n + i] += y[i] * (g[i] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps) {
  const int d = x.shape().back();
  if (gamma.numel() != static_cast<size_t>(d) || beta.numel() != static_cast<size_t>(d)) {
    throw ValidationError("layer_norm: affine parameters must have " + std::to_string(d) + " entries");
  }
  const size_t rows = x.numel() / d;
  std::vector<Real> xhat(x.numel()), rstd(rows), out(x.numel());
  for (size_t r = 0; r < rows; ++r) {
    const Real* in = x.vec().data() + r * d;
    Real mu = 0;
    for (int i = 0; i < d; ++i) mu += in[i];
    mu /= d;
    Real var = 0;
    for (int i = 0; i < d; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= d;
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (int i = 0; i < d; ++i) {
      xhat[r * d + i] = (in[i] - mu) * rstd[r];
      out[r * d + i] = xhat[r * d + i] * gamma.vec()[i] + beta.vec()[i];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [x, gamma, beta, d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](TensorImpl& self) {
    const auto& g = self.grad;
    if (gamma.requires_grad() || beta.requires_grad()) {
      std::vector<Real> gg(d, 0.0), gbt(d, 0.0);
      for (size_t r = 0; r < rows; ++r)
        for (int i = 0; i < d; ++i) {
          gg[i] += g[r * d + i] * xhat[r * d + i];
          gbt[i] += g[r * d + i];
        }
      accumulate_grad(gamma, gg);
      accumulate_grad(beta, gbt);
    }
    if (x.requires_grad()) {
      auto& gx = x.impl()->ensure_grad();
      for (size_t r = 0; r < rows; ++r) {
        Real sum_g = 0, sum_gx = 0;
        for (int i = 0; i < d; ++i) {
          const Real gh = g[r * d + i] * gamma.vec()[i];
          sum_g += gh;
          sum_gx += gh * xhat[r * d + i];
        }
        for (int i = 0; i < d; ++i) {
          const Real gh = g[r * d + i] * gamma.vec()[i];
          gx[r * d + i] += rstd[r] / d * (d * gh - sum_g - xhat[r * d + i] * sum_gx);
        }
      }
    }
  });
}

namespace {

struct ConvGeom {
  int n, ci, h, w, co, kh, kw, pad, ho, wo;
  size_t col_rows() const { return static_cast<size_t>(ci) * kh * kw; }
  size_t col_cols() const { return static_cast<size_t>(ho) * wo; }
};

void im2col(const Real* img, const ConvGeom& g, Real* cols) {
  const size_t hw = g.col_cols();
  for (int c = 0; c < g.ci; ++c)
    for (int ky = 0; ky < g.kh; ++ky)
      for (int kx = 0; kx < g.kw; ++kx) {
        Real* dst = cols + ((static_cast<size_t>(c) * g.kh + ky) * g.kw + kx) * hw;
        const Real* src = img + static_cast<size_t>(c) * g.h * g.w;
        for (int y = 0; y < g.ho; ++y) {
          const int iy = y + ky - g.pad;
          Real* row = dst + static_cast<size_t>(y) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(row, g.wo, 0.0);
            continue;
          }
          for (int x = 0; x < g.wo; ++x) {
            const int ix = x + kx - g.pad;
            row[x] = (ix < 0 || ix >= g.w) ? 0.0 : src[static_cast<size_t>(iy) * g.w + ix];
          }
        }
      }
}

void col2im(const Real* cols, const ConvGeom& g, Real* img) {
  const size_t hw = g.col_cols();
  for (int c = 0; c < g.ci; ++c)
    for (int ky = 0; ky < g.kh; ++ky)
      for (int kx = 0; kx < g.kw; ++kx) {
        const Real* src = cols + ((static_cast<size_t>(c) * g.kh + ky) * g.kw + kx) * hw;
        Real* dst = img + static_cast<size_t>(c) * g.h * g.w;
        for (int y = 0; y < g.ho; ++y) {
          const int iy = y + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          for (int x = 0; x < g.wo; ++x) {
            const int ix = x + kx - g.pad;
            if (ix >= 0 && ix < g.w) dst[static_cast<size_t>(iy) * g.w + ix] += src[static_cast<size_t>(y) * g.wo + x];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
  if (x.ndim() != 4 || w.ndim() != 4 || x.shape()[1] != w.shape()[1]) {
    throw ValidationError("conv2d: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  }
  ConvGeom g{x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3], w.shape()[0], w.shape()[2], w.shape()[3], pad, 0, 0};
  g.ho = g.h + 2 * pad - g.kh + 1;
  g.wo = g.w + 2 * pad - g.kw + 1;
  if (g.ho < 1 || g.wo < 1) throw ValidationError("conv2d: kernel larger than padded input");
  if (b.defined() && b.numel() != static_cast<size_t>(g.co)) throw ValidationError("conv2d: bias size");
  const bool pointwise = g.kh == 1 && g.kw == 1 && pad == 0;
  const size_t in_sz = static_cast<size_t>(g.ci) * g.h * g.w, out_sz = static_cast<size_t>(g.co) * g.col_cols();
  std::vector<Real> out(static_cast<size_t>(g.n) * out_sz);
  std::vector<Real> cols(pointwise ? 0 : g.col_rows() * g.col_cols());
  CMapMat W(w.vec().data(), g.co, g.col_rows());
  for (int i = 0; i < g.n; ++i) {
    const Real* src = x.vec().data() + i * in_sz;
    if (!pointwise) im2col(src, g, cols.data());
    CMapMat C(pointwise ? src : cols.data(), g.col_rows(), g.col_cols());
    MapMat Y(out.data() + i * out_sz, g.co, g.col_cols());
    Y.noalias() = W * C;
    if (b.defined()) Y.colwise() += Eigen::Map<const Eigen::VectorXd>(b.vec().data(), g.co);
  }
  return make_result({g.n, g.co, g.ho, g.wo}, std::move(out), {x, w, b}, [x, w, b, g, pointwise, in_sz, out_sz](TensorImpl& self) {
    std::vector<Real> cols(pointwise ? 0 : g.col_rows() * g.col_cols());
    std::vector<Real> gcols(x.requires_grad() && !pointwise ? cols.size() : 0);
    CMapMat W(w.vec().data(), g.co, g.col_rows());
    Real* gw = w.requires_grad() ? w.impl()->ensure_grad().data() : nullptr;
    Real* gx = x.requires_grad() ? x.impl()->ensure_grad().data() : nullptr;
    Real* gb = (b.defined() && b.requires_grad()) ? b.impl()->ensure_grad().data() : nullptr;
    for (int i = 0; i < g.n; ++i) {
      CMapMat G(self.grad.data() + i * out_sz, g.co, g.col_cols());
      const Real* src = x.vec().data() + i * in_sz;
      if (gw) {
        if (!pointwise) im2col(src, g, cols.data());
        CMapMat C(pointwise ? src : cols.data(), g.col_rows(), g.col_cols());
        MapMat(gw, g.co, g.col_rows()).noalias() += G * C.transpose();
      }
      if (gx) {
        if (pointwise) {
          MapMat(gx + i * in_sz, g.ci, g.col_cols()).noalias() += W.transpose() * G;
        } else {
          MapMat GC(gcols.data(), g.col_rows(), g.col_cols());
          GC.noalias() = W.transpose() * G;
          col2im(gcols.data(), g, gx + i * in_sz);
        }
      }
      if (gb) {
        // Scalar loop: Eigen's vectorized row sums depend on buffer alignment.
        for (int o = 0; o < g.co; ++o) {
          const Real* row = self.grad.data() + i * out_sz + static_cast<size_t>(o) * g.col_cols();
          Real acc = 0;
          for (int p = 0; p < g.col_cols(); ++p) acc += row[p];
          gb[o] += acc;
        }
      }
    }
  });
}

Tensor max_pool2x2(const Tensor& x) {
  if (x.ndim() != 4 || x.shape()[2] % 2 || x.shape()[3] % 2) {
    throw ValidationError("max_pool2x2: needs [N,C,H,W] with even H and W, got " + shape_str(x.shape()));
  }
  const int n = x.shape()[0] * x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  const int ho = h / 2, wo = w / 2;
  std::vector<Real> out(static_cast<size_t>(n) * ho * wo);
  std::vector<size_t> arg(out.size());
  for (int p = 0; p < n; ++p)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx) {
        const size_t base = static_cast<size_t>(p) * h * w;
        size_t best = base + static_cast<size_t>(2 * y) * w + 2 * xx;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const size_t idx = base + static_cast<size_t>(2 * y + dy) * w + 2 * xx + dx;
            if (x.vec()[idx] > x.vec()[best]) best = idx;
          }
        const size_t o = (static_cast<size_t>(p) * ho + y) * wo + xx;
        out[o] = x.vec()[best];
        arg[o] = best;
      }
  return make_result({x.shape()[0], x.shape()[1], ho, wo}, std::move(out), {x}, [x, arg = std::move(arg)](TensorImpl& self) {
    auto& gx = x.impl()->ensure_grad();
    for (size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += self.grad[i];
  });
}

}  // namespace hybridgait::nn
