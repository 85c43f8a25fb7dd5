// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Region-adaptive frequency aggregation.
//
// The omni-frequency tensor stacks the enhanced bands at full resolution
// (low band upsampled x2 twice, mid once), channel order [low, mid, high].
// A 1x1 embedding predicts per-position logits over the m basis kernels;
// softmax gives the coefficient field alpha. The per-position dynamic kernel
// K~(i,j) = sum_n alpha_n(i,j) K_n is never materialized on the production
// path: since the output is linear in the kernel, we convolve once with every
// basis kernel (one stacked conv) and blend the m outputs with alpha. The
// positionwise evaluation exists as a reference for tests; both paths agree
// to 1e-9.
#pragma once

#include <vector>

#include "ornet/conv.hpp"
#include "ornet/resample.hpp"
#include "ornet/tensor.hpp"

namespace ornet {

// Basis bank: (m, in, c, k, k) — m filters mapping in -> c channels — plus
// the 1x1 embedding producing the alpha logits.
struct KernelPool {
  Tensor basis;
  Conv2dParams embedding;  // 1x1, in -> m

  int m() const { return basis.dim(0); }
  int in_channels() const { return basis.dim(1); }
  int out_channels() const { return basis.dim(2); }
  int ksize() const { return basis.dim(3); }
};

inline KernelPool make_kernel_pool(int in_ch, int out_ch, int k, int m, Rng& rng) {
  require(m >= 1, "make_kernel_pool: m must be >= 1");
  require(k % 2 == 1, "make_kernel_pool: kernel size must be odd");
  KernelPool pool;
  const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
  pool.basis = Tensor::randn({m, in_ch, out_ch, k, k}, rng, stddev,
                             /*requires_grad=*/true);
  pool.embedding = make_conv2d(in_ch, m, 1, 1, rng);
  return pool;
}

namespace detail {

// (m, in, c, k, k) -> (m, c, in, k, k): the pool stores filters with the
// input axis first (the layout the equations write), conv2d wants output
// channels first. Pure permutation, so the backward is the inverse scatter.
inline Tensor pool_conv_layout(const Tensor& basis) {
  require(basis.defined() && basis.ndim() == 5, "pool_conv_layout: need 5-D basis");
  const int m = basis.dim(0), in = basis.dim(1), c = basis.dim(2), k = basis.dim(3);
  const std::int64_t kk = static_cast<std::int64_t>(k) * k;
  std::vector<double> out(basis.values().size());
  const double* src = basis.values().data();
  for (int n = 0; n < m; ++n)
    for (int ci = 0; ci < in; ++ci)
      for (int o = 0; o < c; ++o) {
        const std::int64_t s = ((static_cast<std::int64_t>(n) * in + ci) * c + o) * kk;
        const std::int64_t d = ((static_cast<std::int64_t>(n) * c + o) * in + ci) * kk;
        std::copy_n(src + s, kk, out.data() + d);
      }
  auto bn = basis.node();
  return make_op({m, c, in, k, k}, std::move(out), {basis},
                 [bn, m, in, c, kk](TensorNode& self) {
                   bn->ensure_grad();
                   for (int n = 0; n < m; ++n)
                     for (int ci = 0; ci < in; ++ci)
                       for (int o = 0; o < c; ++o) {
                         const std::int64_t s =
                             ((static_cast<std::int64_t>(n) * in + ci) * c + o) * kk;
                         const std::int64_t d =
                             ((static_cast<std::int64_t>(n) * c + o) * in + ci) * kk;
                         for (std::int64_t t = 0; t < kk; ++t)
                           bn->grad[static_cast<size_t>(s + t)] +=
                               self.grad[static_cast<size_t>(d + t)];
                       }
                 });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Omni assembly: bands coarsest-first, each upsampled x2 per level gap, then
// concatenated [low, ..., high].
// ---------------------------------------------------------------------------
inline Tensor assemble_omni(const std::vector<Tensor>& enhanced) {
  require(!enhanced.empty(), "assemble_omni: no bands");
  const int levels = static_cast<int>(enhanced.size());
  const Tensor& finest = enhanced[static_cast<size_t>(levels - 1)];
  std::vector<Tensor> parts;
  for (int i = 0; i < levels; ++i) {
    Tensor t = enhanced[static_cast<size_t>(i)];
    const int hops = levels - 1 - i;
    const int expect_h = finest.dim(2) >> hops;
    const int expect_w = finest.dim(3) >> hops;
    if (t.dim(2) != expect_h || t.dim(3) != expect_w || (finest.dim(2) % (1 << hops)) != 0)
      fail("assemble_omni: band ", i, " is ", t.dim(2), "x", t.dim(3),
           ", expected ", expect_h, "x", expect_w, " for a 2x pyramid");
    for (int h = 0; h < hops; ++h) t = bilinear_upsample(t, 2);  // x2 per hop
    parts.push_back(t);
  }
  return parts.size() == 1 ? parts[0] : concat_channels(parts);
}

// ---------------------------------------------------------------------------
// Dynamic attention
// ---------------------------------------------------------------------------

// Per-position convex coefficients over the basis kernels: (N, m, H, W).
inline Tensor rfa_alpha(const Tensor& omni, const KernelPool& pool) {
  if (omni.dim(1) != pool.in_channels())
    fail("rfa_alpha: omni has ", omni.dim(1), " channels, pool expects ",
         pool.in_channels());
  return softmax_channels(conv2d(omni, pool.embedding));
}

// Reference synthesis of the dynamic kernel at one position: (in, c, k, k).
// Test/inspection path; value-only.
inline Tensor synthesize_kernel(const std::vector<double>& alpha_at,
                                const KernelPool& pool) {
  if (static_cast<int>(alpha_at.size()) != pool.m())
    fail("synthesize_kernel: alpha has ", alpha_at.size(), " entries, pool has ",
         pool.m(), " kernels");
  const std::int64_t per = pool.basis.numel() / pool.m();
  std::vector<double> out(static_cast<size_t>(per), 0.0);
  const double* src = pool.basis.values().data();
  for (int n = 0; n < pool.m(); ++n) {
    const double a = alpha_at[static_cast<size_t>(n)];
    for (std::int64_t i = 0; i < per; ++i)
      out[static_cast<size_t>(i)] += a * src[n * per + i];
  }
  return Tensor::from_data(
      {pool.in_channels(), pool.out_channels(), pool.ksize(), pool.ksize()},
      std::move(out));
}

struct AttentionMap {
  Tensor a;                        // (N, c, H, W), values in (0,1)
  std::vector<int> band_channels;  // widths of the band slices inside c

  // Channel slice of band i (e.g. 0 = low) when band widths are known.
  Tensor band(int i) const {
    require(!band_channels.empty(), "AttentionMap::band: no band split recorded");
    int c0 = 0;
    for (int j = 0; j < i; ++j) c0 += band_channels[static_cast<size_t>(j)];
    return slice_channels(a, c0, c0 + band_channels[static_cast<size_t>(i)]);
  }
};

// Production path: one stacked convolution with all basis kernels, then the
// per-position alpha blend, then sigmoid. Linearity in the kernel makes this
// exactly the positionwise dynamic convolution.
inline Tensor attention_logits(const Tensor& omni, const Tensor& alpha,
                               const KernelPool& pool) {
  const int c = pool.out_channels();
  const int pad = pool.ksize() / 2;
  Tensor w = detail::pool_conv_layout(pool.basis);       // (m, c, in, k, k)
  Tensor convs = conv2d(omni, w, Tensor(), 1, pad);      // (N, m*c, H, W)
  Tensor acc;
  for (int n = 0; n < pool.m(); ++n) {
    Tensor part = slice_channels(convs, n * c, (n + 1) * c);
    Tensor an = slice_channels(alpha, n, n + 1);         // (N,1,H,W) broadcast
    Tensor term = mul(part, an);
    acc = n == 0 ? term : add(acc, term);
  }
  return acc;
}

inline AttentionMap attention_map(const Tensor& omni, const KernelPool& pool,
                                  std::vector<int> band_channels = {}) {
  Tensor alpha = rfa_alpha(omni, pool);
  AttentionMap am;
  am.a = sigmoid(attention_logits(omni, alpha, pool));
  am.band_channels = std::move(band_channels);
  return am;
}

// Reference path: assemble K~ at every position and convolve there. Value
// only (no tape); quadratic loop nest, test-sized inputs.
inline Tensor attention_map_positionwise(const Tensor& omni, const KernelPool& pool) {
  NoGradGuard ng;
  Tensor alpha = rfa_alpha(omni, pool);
  const int n = omni.dim(0), in = omni.dim(1), h = omni.dim(2), w = omni.dim(3);
  const int c = pool.out_channels(), k = pool.ksize(), pad = k / 2, m = pool.m();
  require(in == pool.in_channels(), "attention_map_positionwise: channel mismatch");
  std::vector<double> out(static_cast<size_t>(n) * c * h * w);
  std::vector<double> alpha_at(static_cast<size_t>(m));
  const auto& av = alpha.values();
  const auto& xv = omni.values();
  for (int bi = 0; bi < n; ++bi)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        for (int j = 0; j < m; ++j)
          alpha_at[static_cast<size_t>(j)] =
              av[static_cast<size_t>(Tensor::offset(alpha.shape(), bi, j, y, x))];
        Tensor kt = synthesize_kernel(alpha_at, pool);  // (in, c, k, k)
        const double* kv = kt.values().data();
        for (int o = 0; o < c; ++o) {
          double s = 0.0;
          for (int ci = 0; ci < in; ++ci)
            for (int ky = 0; ky < k; ++ky) {
              const int iy = y + ky - pad;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = x + kx - pad;
                if (ix < 0 || ix >= w) continue;
                s += xv[static_cast<size_t>(Tensor::offset(omni.shape(), bi, ci, iy, ix))] *
                     kv[((static_cast<std::int64_t>(ci) * c + o) * k + ky) * k + kx];
              }
            }
          // sigmoid, matching the production gate
          out[static_cast<size_t>(Tensor::offset({n, c, h, w}, bi, o, y, x))] =
              s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
        }
      }
  return Tensor::from_data({n, c, h, w}, std::move(out));
}

// Hadamard gating of the omni features.
inline Tensor aggregate(const AttentionMap& am, const Tensor& omni) {
  if (am.a.shape() != omni.shape())
    fail("aggregate: attention ", detail::shape_str(am.a.shape()),
         " vs omni ", detail::shape_str(omni.shape()));
  return mul(omni, am.a);
}

}  // namespace ornet
