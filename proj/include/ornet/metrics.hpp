// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Image quality metrics for [0, 1]-ranged images: PSNR and single-scale SSIM.
//
// PSNR is computed over all elements of the tensors as given (RGB stays RGB).
// SSIM follows the standard single-scale recipe: BT.601 luma, an 11x11
// Gaussian window with sigma 1.5 normalized to unit mass, K1 = 0.01,
// K2 = 0.03, dynamic range 1.0, and only fully valid window positions (no
// padding), averaged uniformly.
#pragma once

#include <cmath>
#include <vector>

#include "ornet/plane.hpp"
#include "ornet/tensor.hpp"

namespace ornet {

inline constexpr double kPsnrCap = 100.0;  // returned when MSE < 1e-10

inline double mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail("mse: shape mismatch ", detail::shape_str(a.shape()), " vs ",
         detail::shape_str(b.shape()));
  const auto& av = a.values();
  const auto& bv = b.values();
  double s = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  return s / static_cast<double>(av.size());
}

inline double psnr(const Tensor& a, const Tensor& b) {
  const double m = mse(a, b);
  if (m < 1e-10) return kPsnrCap;
  return 10.0 * std::log10(1.0 / m);
}

namespace detail {

inline std::vector<double> gaussian_window_1d(int radius, double sigma) {
  std::vector<double> g(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    g[static_cast<size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable valid-mode correlation with a symmetric 1-D window.
inline Plane gauss_valid(const Plane& p, const std::vector<double>& g) {
  const int r = static_cast<int>(g.size() - 1) / 2;
  Plane rows = make_plane(p.h, p.w - 2 * r);
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < rows.w; ++x) {
      double s = 0.0;
      for (int k = 0; k < static_cast<int>(g.size()); ++k)
        s += g[static_cast<size_t>(k)] * p.at(y, x + k);
      rows.at(y, x) = s;
    }
  Plane out = make_plane(p.h - 2 * r, rows.w);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      double s = 0.0;
      for (int k = 0; k < static_cast<int>(g.size()); ++k)
        s += g[static_cast<size_t>(k)] * rows.at(y + k, x);
      out.at(y, x) = s;
    }
  return out;
}

}  // namespace detail

inline double ssim(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail("ssim: shape mismatch ", detail::shape_str(a.shape()), " vs ",
         detail::shape_str(b.shape()));
  Plane x = luma_plane(a);
  Plane y = luma_plane(b);
  constexpr int kRadius = 5;  // 11x11 window
  if (x.h < 2 * kRadius + 1 || x.w < 2 * kRadius + 1)
    fail("ssim: image ", x.h, "x", x.w, " smaller than the 11x11 window");

  const std::vector<double> g = detail::gaussian_window_1d(kRadius, 1.5);
  Plane xx = make_plane(x.h, x.w), yy = make_plane(x.h, x.w),
        xy = make_plane(x.h, x.w);
  for (size_t i = 0; i < x.v.size(); ++i) {
    xx.v[i] = x.v[i] * x.v[i];
    yy.v[i] = y.v[i] * y.v[i];
    xy.v[i] = x.v[i] * y.v[i];
  }
  const Plane mu_x = detail::gauss_valid(x, g);
  const Plane mu_y = detail::gauss_valid(y, g);
  const Plane m_xx = detail::gauss_valid(xx, g);
  const Plane m_yy = detail::gauss_valid(yy, g);
  const Plane m_xy = detail::gauss_valid(xy, g);

  constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;  // (K2 * L)^2
  double total = 0.0;
  for (size_t i = 0; i < mu_x.v.size(); ++i) {
    const double mx = mu_x.v[i], my = mu_y.v[i];
    const double vx = m_xx.v[i] - mx * mx;
    const double vy = m_yy.v[i] - my * my;
    const double cxy = m_xy.v[i] - mx * my;
    total += ((2.0 * mx * my + kC1) * (2.0 * cxy + kC2)) /
             ((mx * mx + my * my + kC1) * (vx + vy + kC2));
  }
  return total / static_cast<double>(mu_x.v.size());
}

}  // namespace ornet
