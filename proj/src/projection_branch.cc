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

#include "hybridgait/projection_branch.h"

#include <Eigen/Core>

#include <cmath>

namespace hybridgait {

using nn::Tensor;

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

struct Geom {
  int n, c, h, w, co, kh, kw;
  int taps() const { return kh * kw; }
  size_t hw() const { return static_cast<size_t>(h) * w; }
};

// Bilinear read of one channel plane with zero padding. Also returns the
// partial derivatives with respect to the sampling location.
struct Sample {
  Real value, d_dy, d_dx;
  int y0, x0;
  Real ly, lx;
};

inline Real pix(const Real* plane, int h, int w, int y, int x) {
  return (y < 0 || y >= h || x < 0 || x >= w) ? 0.0 : plane[static_cast<size_t>(y) * w + x];
}

inline Sample bilinear(const Real* plane, int h, int w, Real y, Real x) {
  Sample s;
  const Real fy = std::floor(y), fx = std::floor(x);
  s.y0 = static_cast<int>(fy);
  s.x0 = static_cast<int>(fx);
  s.ly = y - fy;
  s.lx = x - fx;
  const Real v00 = pix(plane, h, w, s.y0, s.x0), v01 = pix(plane, h, w, s.y0, s.x0 + 1);
  const Real v10 = pix(plane, h, w, s.y0 + 1, s.x0), v11 = pix(plane, h, w, s.y0 + 1, s.x0 + 1);
  s.value = (1 - s.ly) * ((1 - s.lx) * v00 + s.lx * v01) + s.ly * ((1 - s.lx) * v10 + s.lx * v11);
  s.d_dy = (1 - s.lx) * (v10 - v00) + s.lx * (v11 - v01);
  s.d_dx = (1 - s.ly) * (v01 - v00) + s.ly * (v11 - v10);
  return s;
}

inline void scatter(Real* plane, int h, int w, const Sample& s, Real g) {
  const Real wts[4] = {(1 - s.ly) * (1 - s.lx), (1 - s.ly) * s.lx, s.ly * (1 - s.lx), s.ly * s.lx};
  const int ys[4] = {s.y0, s.y0, s.y0 + 1, s.y0 + 1};
  const int xs[4] = {s.x0, s.x0 + 1, s.x0, s.x0 + 1};
  for (int i = 0; i < 4; ++i) {
    if (ys[i] >= 0 && ys[i] < h && xs[i] >= 0 && xs[i] < w) plane[static_cast<size_t>(ys[i]) * w + xs[i]] += g * wts[i];
  }
}

// cols[(c*K + k), p] = mask_k(p) * f_c(p + p_k + offset_k(p)) for sample i.
void deform_im2col(const Geom& g, const Real* f, const Real* off, const Real* mask, Real* cols) {
  const int py0 = (g.kh - 1) / 2, px0 = (g.kw - 1) / 2;
  for (int c = 0; c < g.c; ++c) {
    const Real* plane = f + static_cast<size_t>(c) * g.hw();
    for (int k = 0; k < g.taps(); ++k) {
      const int ky = k / g.kw - py0, kx = k % g.kw - px0;
      const Real* dy = off + static_cast<size_t>(2 * k) * g.hw();
      const Real* dx = off + static_cast<size_t>(2 * k + 1) * g.hw();
      const Real* m = mask + static_cast<size_t>(k) * g.hw();
      Real* dst = cols + (static_cast<size_t>(c) * g.taps() + k) * g.hw();
      for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
          const size_t p = static_cast<size_t>(y) * g.w + x;
          dst[p] = m[p] * bilinear(plane, g.h, g.w, y + ky + dy[p], x + kx + dx[p]).value;
        }
    }
  }
}

}  // namespace

Tensor deformable_sample(const Tensor& f, const DeformField& field, const Tensor& weight) {
  const Tensor& offsets = field.offsets;
  const Tensor& mask = field.mask;
  if (f.ndim() != 4 || weight.ndim() != 4 || weight.dim(1) != f.dim(1)) {
    throw ValidationError("deformable_sample: features " + nn::shape_str(f.shape()) + " vs weight " +
                          nn::shape_str(weight.shape()));
  }
  Geom g{f.dim(0), f.dim(1), f.dim(2), f.dim(3), weight.dim(0), weight.dim(2), weight.dim(3)};
  if (g.kh % 2 == 0 || g.kw % 2 == 0) throw ValidationError("deformable_sample: kernel size must be odd");
  const nn::Shape off_shape{g.n, 2 * g.taps(), g.h, g.w}, mask_shape{g.n, g.taps(), g.h, g.w};
  if (offsets.shape() != off_shape || mask.shape() != mask_shape) {
    throw ValidationError("deformable_sample: field shapes " + nn::shape_str(offsets.shape()) + " / " +
                          nn::shape_str(mask.shape()) + " do not match " + nn::shape_str(off_shape) + " / " +
                          nn::shape_str(mask_shape));
  }
  const size_t in_sz = static_cast<size_t>(g.c) * g.hw(), out_sz = static_cast<size_t>(g.co) * g.hw();
  const size_t off_sz = 2 * g.taps() * g.hw(), mask_sz = g.taps() * g.hw();
  const size_t col_rows = static_cast<size_t>(g.c) * g.taps();
  std::vector<Real> out(static_cast<size_t>(g.n) * out_sz);
  std::vector<Real> cols(col_rows * g.hw());
  CMapMat W(weight.vec().data(), g.co, col_rows);
  for (int i = 0; i < g.n; ++i) {
    deform_im2col(g, f.vec().data() + i * in_sz, offsets.vec().data() + i * off_sz, mask.vec().data() + i * mask_sz,
                  cols.data());
    MapMat(out.data() + i * out_sz, g.co, g.hw()).noalias() = W * CMapMat(cols.data(), col_rows, g.hw());
  }
  return nn::make_result({g.n, g.co, g.h, g.w}, std::move(out), {f, offsets, mask, weight},
                         [f, offsets, mask, weight, g, in_sz, out_sz, off_sz, mask_sz, col_rows](nn::TensorImpl& self) {
    const int py0 = (g.kh - 1) / 2, px0 = (g.kw - 1) / 2;
    CMapMat W(weight.vec().data(), g.co, col_rows);
    std::vector<Real> cols(col_rows * g.hw()), gcols(col_rows * g.hw());
    Real* gw = weight.requires_grad() ? weight.impl()->ensure_grad().data() : nullptr;
    Real* gf = f.requires_grad() ? f.impl()->ensure_grad().data() : nullptr;
    Real* goff = offsets.requires_grad() ? offsets.impl()->ensure_grad().data() : nullptr;
    Real* gmask = mask.requires_grad() ? mask.impl()->ensure_grad().data() : nullptr;
    for (int i = 0; i < g.n; ++i) {
      const Real* fi = f.vec().data() + i * in_sz;
      const Real* off = offsets.vec().data() + i * off_sz;
      const Real* m = mask.vec().data() + i * mask_sz;
      CMapMat G(self.grad.data() + i * out_sz, g.co, g.hw());
      if (gw) {
        deform_im2col(g, fi, off, m, cols.data());
        MapMat(gw, g.co, col_rows).noalias() += G * CMapMat(cols.data(), col_rows, g.hw()).transpose();
      }
      if (!gf && !goff && !gmask) continue;
      MapMat(gcols.data(), col_rows, g.hw()).noalias() = W.transpose() * G;
      for (int c = 0; c < g.c; ++c) {
        const Real* plane = fi + static_cast<size_t>(c) * g.hw();
        for (int k = 0; k < g.taps(); ++k) {
          const int ky = k / g.kw - py0, kx = k % g.kw - px0;
          const size_t dy_off = static_cast<size_t>(2 * k) * g.hw(), dx_off = static_cast<size_t>(2 * k + 1) * g.hw();
          const size_t m_off = static_cast<size_t>(k) * g.hw();
          const Real* gc = gcols.data() + (static_cast<size_t>(c) * g.taps() + k) * g.hw();
          for (int y = 0; y < g.h; ++y)
            for (int x = 0; x < g.w; ++x) {
              const size_t p = static_cast<size_t>(y) * g.w + x;
              const Real s = gc[p];
              if (s == 0.0) continue;
              const Sample smp = bilinear(plane, g.h, g.w, y + ky + off[dy_off + p], x + kx + off[dx_off + p]);
              const Real mk = m[m_off + p];
              if (gmask) gmask[i * mask_sz + m_off + p] += s * smp.value;
              if (goff) {
                goff[i * off_sz + dy_off + p] += s * mk * smp.d_dy;
                goff[i * off_sz + dx_off + p] += s * mk * smp.d_dx;
              }
              if (gf) scatter(gf + i * in_sz + static_cast<size_t>(c) * g.hw(), g.h, g.w, smp, s * mk);
            }
        }
      }
    }
  });
}

SilhouetteGuidedDeformation::SilhouetteGuidedDeformation(nn::ParameterStore& store, const std::string& name,
                                                         int channels, int kernel, nn::Rng& rng)
    : kernel_(kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw ValidationError("SilD kernel size must be odd");
  const int taps = kernel * kernel;
  offset_head = nn::Conv2d(store, name + ".offset_head", 2 * channels, 2 * taps, 3, true, rng);
  mask_head = nn::Conv2d(store, name + ".mask_head", 2 * channels, taps, 3, true, rng);
  for (Tensor* t : {&offset_head.weight, &offset_head.bias, &mask_head.weight, &mask_head.bias}) {
    std::fill(t->vec().begin(), t->vec().end(), 0.0);
  }
  weight = store.create(name + ".weight", {channels, channels, kernel, kernel});
  const int center = taps / 2;
  for (int c = 0; c < channels; ++c) weight.vec()[(static_cast<size_t>(c) * channels + c) * taps + center] = 2.0;
}

DeformField SilhouetteGuidedDeformation::predict_deformation(const Tensor& f_app, const Tensor& f_pro) const {
  if (f_app.shape() != f_pro.shape() || f_app.ndim() != 4) {
    throw ValidationError("predict_deformation: appearance " + nn::shape_str(f_app.shape()) + " vs projection " +
                          nn::shape_str(f_pro.shape()));
  }
  Tensor both = nn::concat({f_app, f_pro}, 1);
  return DeformField{offset_head(both), nn::sigmoid(mask_head(both))};
}

Tensor SilhouetteGuidedDeformation::forward(const Tensor& f_app, const Tensor& f_pro) const {
  return deformable_sample(f_pro, predict_deformation(f_app, f_pro), weight);
}

}  // namespace hybridgait
