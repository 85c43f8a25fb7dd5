// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-channel image plane plus conversions from tensors. Shared by the
// frequency-analysis and metrics code, both of which work on luma.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ornet/tensor.hpp"

namespace ornet {

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;

  double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
};

inline Plane make_plane(int h, int w, double fill = 0.0) {
  require(h > 0 && w > 0, "make_plane: dims must be positive");
  Plane p;
  p.h = h;
  p.w = w;
  p.v.assign(static_cast<size_t>(h) * w, fill);
  return p;
}

namespace detail {

// Accepts (H,W), (C,H,W) or (1,C,H,W); returns {C,H,W,base offset}.
struct ChwView {
  int c, h, w;
  std::int64_t stride;  // elements per channel
};

inline ChwView chw_view(const Tensor& t) {
  require(t.defined(), "plane conversion: undefined tensor");
  if (t.ndim() == 2) return {1, t.dim(0), t.dim(1), t.numel()};
  if (t.ndim() == 3)
    return {t.dim(0), t.dim(1), t.dim(2),
            static_cast<std::int64_t>(t.dim(1)) * t.dim(2)};
  if (t.ndim() == 4 && t.dim(0) == 1)
    return {t.dim(1), t.dim(2), t.dim(3),
            static_cast<std::int64_t>(t.dim(2)) * t.dim(3)};
  fail("plane conversion: expected (H,W), (C,H,W) or (1,C,H,W), got ",
       detail::shape_str(t.shape()));
}

}  // namespace detail

// ITU-R BT.601 luma of an RGB tensor; single-channel inputs pass through.
inline Plane luma_plane(const Tensor& img) {
  const detail::ChwView v = detail::chw_view(img);
  require(v.c == 1 || v.c == 3, "luma_plane: need 1 or 3 channels");
  Plane p = make_plane(v.h, v.w);
  const double* d = img.values().data();
  const std::int64_t n = static_cast<std::int64_t>(v.h) * v.w;
  if (v.c == 1) {
    std::copy_n(d, n, p.v.data());
  } else {
    for (std::int64_t i = 0; i < n; ++i)
      p.v[static_cast<size_t>(i)] =
          0.299 * d[i] + 0.587 * d[n + i] + 0.114 * d[2 * n + i];
  }
  return p;
}

// Mean of |f| over channels: the "feature magnitude map" analyzed by the
// frequency profiles.
inline Plane channel_mean_abs(const Tensor& f) {
  const detail::ChwView v = detail::chw_view(f);
  Plane p = make_plane(v.h, v.w);
  const double* d = f.values().data();
  const std::int64_t n = static_cast<std::int64_t>(v.h) * v.w;
  for (int c = 0; c < v.c; ++c)
    for (std::int64_t i = 0; i < n; ++i)
      p.v[static_cast<size_t>(i)] += std::abs(d[c * n + i]);
  for (double& x : p.v) x /= v.c;
  return p;
}

}  // namespace ornet
