// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Resampling: differentiable bilinear upsampling (the in-graph up2 used by
// the decomposition and assembly), plain bicubic resize (data pipeline), and
// a separable Gaussian blur (synthetic degradations).
//
// All samplers use half-pixel centers — source coordinate of output pixel d
// at ratio r is (d + 0.5) * r - 0.5 — with edge clamping. Corners of a
// constant image therefore stay exact, and upsampling is shift-consistent
// with the stride-2 convs on the analysis side.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ornet/tensor.hpp"

namespace ornet {
namespace detail {

struct Tap2 {
  int i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

inline std::vector<Tap2> bilinear_taps(int in, int out, double ratio) {
  std::vector<Tap2> taps(static_cast<size_t>(out));
  for (int d = 0; d < out; ++d) {
    double s = (d + 0.5) * ratio - 0.5;
    if (s < 0.0) s = 0.0;
    if (s > in - 1) s = in - 1;
    int i0 = static_cast<int>(std::floor(s));
    if (i0 > in - 1) i0 = in - 1;
    taps[static_cast<size_t>(d)] = {i0, std::min(i0 + 1, in - 1), s - i0};
  }
  return taps;
}

}  // namespace detail

// Integer-factor bilinear upsampling of (N,C,H,W) to (N,C,f*H,f*W).
inline Tensor bilinear_upsample(const Tensor& x, int factor) {
  require(x.defined() && x.ndim() == 4, "bilinear_upsample: input must be 4-D");
  require(factor >= 2, "bilinear_upsample: factor must be >= 2");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h * factor, ow = w * factor;
  const double ratio = 1.0 / factor;
  const auto ty = detail::bilinear_taps(h, oh, ratio);
  const auto tx = detail::bilinear_taps(w, ow, ratio);

  std::vector<double> out(static_cast<size_t>(n) * c * oh * ow);
  const double* src = x.values().data();
  const std::int64_t planes = static_cast<std::int64_t>(n) * c;
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* in = src + p * h * w;
    double* dst = out.data() + p * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const detail::Tap2& a = ty[static_cast<size_t>(oy)];
      const double* r0 = in + static_cast<std::int64_t>(a.i0) * w;
      const double* r1 = in + static_cast<std::int64_t>(a.i1) * w;
      for (int ox = 0; ox < ow; ++ox) {
        const detail::Tap2& b = tx[static_cast<size_t>(ox)];
        const double top = r0[b.i0] * (1.0 - b.w1) + r0[b.i1] * b.w1;
        const double bot = r1[b.i0] * (1.0 - b.w1) + r1[b.i1] * b.w1;
        dst[static_cast<std::int64_t>(oy) * ow + ox] = top * (1.0 - a.w1) + bot * a.w1;
      }
    }
  }

  auto xn = x.node();
  return detail::make_op(
      {n, c, oh, ow}, std::move(out), {x},
      [xn, ty, tx, h, w, oh, ow, planes](detail::TensorNode& self) {
        xn->ensure_grad();
        for (std::int64_t p = 0; p < planes; ++p) {
          double* gin = xn->grad.data() + p * h * w;
          const double* g = self.grad.data() + p * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const detail::Tap2& a = ty[static_cast<size_t>(oy)];
            for (int ox = 0; ox < ow; ++ox) {
              const detail::Tap2& b = tx[static_cast<size_t>(ox)];
              const double gv = g[static_cast<std::int64_t>(oy) * ow + ox];
              gin[static_cast<std::int64_t>(a.i0) * w + b.i0] += gv * (1.0 - a.w1) * (1.0 - b.w1);
              gin[static_cast<std::int64_t>(a.i0) * w + b.i1] += gv * (1.0 - a.w1) * b.w1;
              gin[static_cast<std::int64_t>(a.i1) * w + b.i0] += gv * a.w1 * (1.0 - b.w1);
              gin[static_cast<std::int64_t>(a.i1) * w + b.i1] += gv * a.w1 * b.w1;
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Bicubic resize (Catmull-Rom, a = -0.5). Value-only: the data pipeline and
// baselines use it outside the gradient graph.
// ---------------------------------------------------------------------------
namespace detail {

struct Tap4 {
  int i[4];
  double w[4];
};

inline double cubic_weight(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

inline std::vector<Tap4> bicubic_taps(int in, int out) {
  const double ratio = static_cast<double>(in) / out;
  std::vector<Tap4> taps(static_cast<size_t>(out));
  for (int d = 0; d < out; ++d) {
    const double s = (d + 0.5) * ratio - 0.5;
    const int base = static_cast<int>(std::floor(s));
    Tap4& t = taps[static_cast<size_t>(d)];
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) {
      const int idx = base - 1 + j;
      t.i[j] = idx < 0 ? 0 : (idx > in - 1 ? in - 1 : idx);
      t.w[j] = cubic_weight(s - idx);
      sum += t.w[j];
    }
    // The four taps of a Catmull-Rom kernel sum to 1 exactly in exact
    // arithmetic; renormalize to kill the last-ulp drift.
    for (double& w : t.w) w /= sum;
  }
  return taps;
}

// One separable pass along the last axis of a (rows, len) plane.
inline void resample_axis(const double* src, int rows, int len_in,
                          const std::vector<Tap4>& taps, double* dst) {
  const int len_out = static_cast<int>(taps.size());
  for (int r = 0; r < rows; ++r) {
    const double* in = src + static_cast<std::int64_t>(r) * len_in;
    double* out = dst + static_cast<std::int64_t>(r) * len_out;
    for (int d = 0; d < len_out; ++d) {
      const Tap4& t = taps[static_cast<size_t>(d)];
      out[d] = in[t.i[0]] * t.w[0] + in[t.i[1]] * t.w[1] +
               in[t.i[2]] * t.w[2] + in[t.i[3]] * t.w[3];
    }
  }
}

}  // namespace detail

// Resize (C,H,W) or (N,C,H,W) values to (oh, ow). Rows first, then columns.
inline Tensor bicubic_resize(const Tensor& x, int oh, int ow) {
  require(x.defined() && (x.ndim() == 3 || x.ndim() == 4),
          "bicubic_resize: input must be 3-D or 4-D");
  require(oh > 0 && ow > 0, "bicubic_resize: bad output size");
  const bool batched = x.ndim() == 4;
  const int n = batched ? x.dim(0) : 1;
  const int c = batched ? x.dim(1) : x.dim(0);
  const int h = batched ? x.dim(2) : x.dim(1);
  const int w = batched ? x.dim(3) : x.dim(2);
  const auto tx = detail::bicubic_taps(w, ow);
  const auto ty = detail::bicubic_taps(h, oh);

  const std::int64_t planes = static_cast<std::int64_t>(n) * c;
  std::vector<double> mid(static_cast<size_t>(planes) * h * ow);
  for (std::int64_t p = 0; p < planes; ++p)
    detail::resample_axis(x.values().data() + p * h * w, h, w, tx,
                          mid.data() + p * h * ow);

  // Column pass: work on the transposed view by striding manually.
  std::vector<double> out(static_cast<size_t>(planes) * oh * ow);
  std::vector<double> colbuf(static_cast<size_t>(h));
  std::vector<double> colout(static_cast<size_t>(oh));
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* src = mid.data() + p * h * ow;
    double* dst = out.data() + p * oh * ow;
    for (int xcol = 0; xcol < ow; ++xcol) {
      for (int y = 0; y < h; ++y) colbuf[static_cast<size_t>(y)] = src[static_cast<std::int64_t>(y) * ow + xcol];
      detail::resample_axis(colbuf.data(), 1, h, ty, colout.data());
      for (int y = 0; y < oh; ++y) dst[static_cast<std::int64_t>(y) * ow + xcol] = colout[static_cast<size_t>(y)];
    }
  }
  std::vector<int> shape = batched ? std::vector<int>{n, c, oh, ow}
                                   : std::vector<int>{c, oh, ow};
  return Tensor::from_data(std::move(shape), std::move(out));
}

// ---------------------------------------------------------------------------
// Separable Gaussian blur, radius ceil(3*sigma), edge clamp. Value-only.
// ---------------------------------------------------------------------------
inline Tensor gaussian_blur(const Tensor& x, double sigma) {
  require(x.defined() && x.ndim() == 3, "gaussian_blur: input must be (C,H,W)");
  require(sigma >= 0.0, "gaussian_blur: negative sigma");
  if (sigma == 0.0) return Tensor::from_data(x.shape(), x.values());

  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kern(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kern[static_cast<size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kern[static_cast<size_t>(i + radius)];
  }
  for (double& v : kern) v /= sum;

  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> mid(x.values().size()), out(x.values().size());
  const double* src = x.values().data();
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  for (int ch = 0; ch < c; ++ch) {
    const std::int64_t base = static_cast<std::int64_t>(ch) * h * w;
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i)
          s += kern[static_cast<size_t>(i + radius)] * src[base + y * w + clampi(xx + i, 0, w - 1)];
        mid[static_cast<size_t>(base + y * w + xx)] = s;
      }
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i)
          s += kern[static_cast<size_t>(i + radius)] * mid[static_cast<size_t>(base + clampi(y + i, 0, h - 1) * w + xx)];
        out[static_cast<size_t>(base + y * w + xx)] = s;
      }
  }
  return Tensor::from_data(x.shape(), std::move(out));
}

}  // namespace ornet
