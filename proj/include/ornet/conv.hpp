// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// 2-D convolution (NCHW, zero padding, stride 1 or 2) via im2col + GEMM.
// The GEMM itself is delegated to Eigen; everything around it — patch
// extraction, padding/stride arithmetic, the three backward products and
// col2im scatter — is implemented here and pinned by hand-computed values
// and finite-difference tests.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <vector>

#include "ornet/tensor.hpp"

namespace ornet {
namespace detail {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C(M,N) = or += A(M,K) * B(K,N), all row-major dense.
inline void gemm(const double* a, const double* b, double* c, int m, int k, int n,
                 bool accumulate) {
  Eigen::Map<const MatRM> ma(a, m, k);
  Eigen::Map<const MatRM> mb(b, k, n);
  Eigen::Map<MatRM> mc(c, m, n);
  if (accumulate)
    mc.noalias() += ma * mb;
  else
    mc.noalias() = ma * mb;
}

// C(M,N) = A(K,M)^T * B(K,N)
inline void gemm_at_b(const double* a, const double* b, double* c, int m, int k, int n) {
  Eigen::Map<const MatRM> ma(a, k, m);
  Eigen::Map<const MatRM> mb(b, k, n);
  Eigen::Map<MatRM> mc(c, m, n);
  mc.noalias() = ma.transpose() * mb;
}

// C(M,K) += A(M,N) * B(K,N)^T
inline void gemm_a_bt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
  Eigen::Map<const MatRM> ma(a, m, n);
  Eigen::Map<const MatRM> mb(b, k, n);
  Eigen::Map<MatRM> mc(c, m, k);
  mc.noalias() += ma * mb.transpose();
}

// Scratch buffers reused across conv calls (single-threaded hot path; kept
// thread_local so concurrent inference threads stay independent).
inline std::vector<double>& scratch_a() {
  static thread_local std::vector<double> buf;
  return buf;
}
inline std::vector<double>& scratch_b() {
  static thread_local std::vector<double> buf;
  return buf;
}

struct ConvDims {
  int c, h, w;        // input
  int m, k;           // output channels (fused), kernel
  int stride, pad;
  int oh, ow;
  std::int64_t cols() const { return static_cast<std::int64_t>(oh) * ow; }
  std::int64_t rows() const { return static_cast<std::int64_t>(c) * k * k; }
};

// Patch matrix: row (c,ky,kx), column (oy,ox); out-of-image taps are zero.
inline void im2col(const double* src, const ConvDims& d, double* col) {
  const std::int64_t n = d.cols();
  for (int c = 0; c < d.c; ++c) {
    const double* plane = src + static_cast<std::int64_t>(c) * d.h * d.w;
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        double* row = col + ((static_cast<std::int64_t>(c) * d.k + ky) * d.k + kx) * n;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * d.stride + ky - d.pad;
          double* out = row + static_cast<std::int64_t>(oy) * d.ow;
          if (iy < 0 || iy >= d.h) {
            std::fill(out, out + d.ow, 0.0);
            continue;
          }
          const double* in = plane + static_cast<std::int64_t>(iy) * d.w;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * d.stride + kx - d.pad;
            out[ox] = (ix >= 0 && ix < d.w) ? in[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col.
inline void col2im_acc(const double* col, const ConvDims& d, double* dst) {
  const std::int64_t n = d.cols();
  for (int c = 0; c < d.c; ++c) {
    double* plane = dst + static_cast<std::int64_t>(c) * d.h * d.w;
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        const double* row = col + ((static_cast<std::int64_t>(c) * d.k + ky) * d.k + kx) * n;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * d.stride + ky - d.pad;
          if (iy < 0 || iy >= d.h) continue;
          double* out = plane + static_cast<std::int64_t>(iy) * d.w;
          const double* in = row + static_cast<std::int64_t>(oy) * d.ow;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * d.stride + kx - d.pad;
            if (ix >= 0 && ix < d.w) out[ix] += in[ox];
          }
        }
      }
    }
  }
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d
//
// x: (N,C,H,W). weight: (M,C,k,k), or (G,M',C,k,k) which acts as a fused
// (G*M',C,k,k) stack — used for applying a whole kernel pool in one GEMM.
// bias: (M) or undefined for none. Output: (N,M,OH,OW) with
// OH = (H + 2*pad - k)/stride + 1.
// ---------------------------------------------------------------------------
inline Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                     int stride, int padding) {
  require(x.defined() && x.ndim() == 4, "conv2d: input must be 4-D (N,C,H,W)");
  require(weight.defined() && (weight.ndim() == 4 || weight.ndim() == 5),
          "conv2d: weight must be 4-D or 5-D");
  require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
  require(padding >= 0, "conv2d: negative padding");

  const bool stacked = weight.ndim() == 5;
  const int m = stacked ? weight.dim(0) * weight.dim(1) : weight.dim(0);
  const int wc = stacked ? weight.dim(2) : weight.dim(1);
  const int k = stacked ? weight.dim(3) : weight.dim(2);
  const int klast = stacked ? weight.dim(4) : weight.dim(3);
  require(k == klast, "conv2d: kernel must be square");
  if (wc != x.dim(1))
    fail("conv2d: input has ", x.dim(1), " channels, weight expects ", wc);
  if (bias.defined())
    require(bias.ndim() == 1 && bias.dim(0) == m, "conv2d: bias shape mismatch");
  if (x.dim(2) < k || x.dim(3) < k)
    fail("conv2d: input ", x.dim(2), "x", x.dim(3), " smaller than kernel ", k);
  if (!detail::all_finite(x.values()))
    throw std::domain_error("conv2d: non-finite value in input");

  detail::ConvDims d;
  d.c = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.m = m;
  d.k = k;
  d.stride = stride;
  d.pad = padding;
  d.oh = (d.h + 2 * padding - k) / stride + 1;
  d.ow = (d.w + 2 * padding - k) / stride + 1;
  require(d.oh > 0 && d.ow > 0, "conv2d: kernel larger than padded input");

  const int batch = x.dim(0);
  const std::int64_t ncols = d.cols();
  const std::int64_t in_plane = static_cast<std::int64_t>(d.c) * d.h * d.w;
  const std::int64_t out_plane = static_cast<std::int64_t>(m) * ncols;
  const bool pointwise = (k == 1 && stride == 1 && padding == 0);

  std::vector<double> out(static_cast<size_t>(batch) * out_plane);
  {
    std::vector<double>& col = detail::scratch_a();
    if (!pointwise) col.resize(static_cast<size_t>(d.rows()) * ncols);
    for (int n = 0; n < batch; ++n) {
      const double* src = x.values().data() + n * in_plane;
      const double* colp = src;  // 1x1 stride-1: patch matrix is the input itself
      if (!pointwise) {
        detail::im2col(src, d, col.data());
        colp = col.data();
      }
      detail::gemm(weight.values().data(), colp, out.data() + n * out_plane,
                   m, static_cast<int>(d.rows()), static_cast<int>(ncols), false);
    }
  }
  if (bias.defined()) {
    const double* bp = bias.values().data();
    for (int n = 0; n < batch; ++n)
      for (int oc = 0; oc < m; ++oc) {
        double* row = out.data() + n * out_plane + oc * ncols;
        const double b = bp[oc];
        for (std::int64_t i = 0; i < ncols; ++i) row[i] += b;
      }
  }

  auto xn = x.node();
  auto wn = weight.node();
  auto bn = bias.defined() ? bias.node() : nullptr;
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);

  return detail::make_op(
      {batch, m, d.oh, d.ow}, std::move(out), inputs,
      [xn, wn, bn, d, batch, ncols, in_plane, out_plane, pointwise](detail::TensorNode& self) {
        const int m = d.m;
        const int krows = static_cast<int>(d.rows());
        const bool need_x = xn->requires_grad;
        const bool need_w = wn->requires_grad;
        const bool need_b = bn && bn->requires_grad;
        if (need_x) xn->ensure_grad();
        if (need_w) wn->ensure_grad();
        if (need_b) bn->ensure_grad();

        std::vector<double>& col = detail::scratch_a();
        std::vector<double>& gcol = detail::scratch_b();
        if (!pointwise) {
          if (need_w) col.resize(static_cast<size_t>(krows) * ncols);
          if (need_x) gcol.resize(static_cast<size_t>(krows) * ncols);
        }

        for (int n = 0; n < batch; ++n) {
          const double* g = self.grad.data() + n * out_plane;
          if (need_b) {
            for (int oc = 0; oc < m; ++oc) {
              double s = 0.0;
              const double* row = g + static_cast<std::int64_t>(oc) * ncols;
              for (std::int64_t i = 0; i < ncols; ++i) s += row[i];
              bn->grad[static_cast<size_t>(oc)] += s;
            }
          }
          if (need_w) {
            const double* src = xn->value.data() + n * in_plane;
            const double* colp = src;
            if (!pointwise) {
              detail::im2col(src, d, col.data());
              colp = col.data();
            }
            // dW(M,K) += dOut(M,N) * col(K,N)^T
            detail::gemm_a_bt_acc(g, colp, wn->grad.data(), m,
                                  static_cast<int>(ncols), krows);
          }
          if (need_x) {
            if (pointwise) {
              // dX(K,N) += W(M,K)^T * dOut(M,N), written via a temp then added
              std::vector<double>& tmp = detail::scratch_b();
              tmp.resize(static_cast<size_t>(krows) * ncols);
              detail::gemm_at_b(wn->value.data(), g, tmp.data(), krows, m,
                                static_cast<int>(ncols));
              double* gx = xn->grad.data() + n * in_plane;
              for (std::int64_t i = 0; i < static_cast<std::int64_t>(krows) * ncols; ++i)
                gx[i] += tmp[static_cast<size_t>(i)];
            } else {
              detail::gemm_at_b(wn->value.data(), g, gcol.data(), krows, m,
                                static_cast<int>(ncols));
              detail::col2im_acc(gcol.data(), d, xn->grad.data() + n * in_plane);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Parameter bundle + He/Kaiming initialization (fan-in), zero biases.
// ---------------------------------------------------------------------------
struct Conv2dParams {
  Tensor weight;
  Tensor bias;  // undefined => no bias term
  int stride = 1;
  int padding = 0;

  int out_channels() const {
    return weight.ndim() == 5 ? weight.dim(0) * weight.dim(1) : weight.dim(0);
  }
  int in_channels() const {
    return weight.ndim() == 5 ? weight.dim(2) : weight.dim(1);
  }
  int ksize() const { return weight.ndim() == 5 ? weight.dim(3) : weight.dim(2); }
};

inline Conv2dParams make_conv2d(int in_ch, int out_ch, int k, int stride, Rng& rng,
                                bool with_bias = true) {
  require(in_ch > 0 && out_ch > 0 && k > 0, "make_conv2d: bad dimensions");
  require(stride == 1 || stride == 2, "make_conv2d: stride must be 1 or 2");
  // "same" padding (k/2) is only well-defined for odd kernels at stride 1;
  // the raw conv2d op itself takes any kernel with explicit padding.
  if (stride == 1)
    require(k % 2 == 1, "make_conv2d: stride-1 layers need an odd kernel");
  Conv2dParams p;
  const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
  p.weight = Tensor::randn({out_ch, in_ch, k, k}, rng, stddev, /*requires_grad=*/true);
  if (with_bias) p.bias = Tensor::zeros({out_ch}, /*requires_grad=*/true);
  p.stride = stride;
  p.padding = k / 2;
  return p;
}

inline Tensor conv2d(const Tensor& x, const Conv2dParams& p) {
  return conv2d(x, p.weight, p.bias, p.stride, p.padding);
}

}  // namespace ornet
