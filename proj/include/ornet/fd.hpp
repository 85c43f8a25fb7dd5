// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Frequency decomposition and enhancement.
//
// A shared trunk of stem convolutions produces features at full, half,
// quarter, ... resolution:
//
//   stem_0 = Conv(x)            (stride 1, full res)
//   stem_1 = Conv_s2(x)         (stride 2 applied to the input)
//   stem_i = Conv_s2(stem_{i-1})  for i >= 2
//
// Bands are telescoping differences against the bilinearly upsampled next
// stem, so each identity  band_i = stem_i - up2(stem_{i+1})  holds exactly by
// construction; the coarsest band is the coarsest stem itself. All stems
// share one channel width, which is what makes the subtraction well-typed.
//
// Enhancement runs coarsest to finest. Each branch concatenates its band
// with the upsampled, 1x1-adapted outputs of all coarser branches, enters
// the branch width through a 1x1 conv, and applies a chain of Frequency
// Enhancement Units (dense conv cascade, per-stage channel attention, 1x1
// fusion, residual).
#pragma once

#include <optional>
#include <vector>

#include "ornet/conv.hpp"
#include "ornet/resample.hpp"
#include "ornet/tensor.hpp"

namespace ornet {

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------
struct FdStems {
  Conv2dParams full;     // stride 1, applied to the input
  Conv2dParams half;     // stride 2, applied to the input
  Conv2dParams quarter;  // stride 2, applied to stem_half
};

struct FrequencyBands {
  Tensor f_low, f_mid, f_high;
  Tensor stem_full, stem_half, stem_quarter;
};

// Generalized trunk evaluation, coarsest-last: stems[0] is full resolution.
inline std::vector<Tensor> stem_pyramid(const Tensor& x,
                                        const std::vector<Conv2dParams>& trunk) {
  require(x.defined() && x.ndim() == 4, "stem_pyramid: input must be 4-D");
  require(!trunk.empty(), "stem_pyramid: empty trunk");
  const int levels = static_cast<int>(trunk.size());
  const int div = 1 << (levels - 1);
  if (x.dim(2) % div != 0 || x.dim(3) % div != 0)
    fail("decompose: spatial dims ", x.dim(2), "x", x.dim(3),
         " not divisible by ", div);
  require(trunk[0].stride == 1, "stem_pyramid: trunk[0] must be stride 1");
  std::vector<Tensor> stems;
  stems.reserve(static_cast<size_t>(levels));
  stems.push_back(conv2d(x, trunk[0]));
  for (int i = 1; i < levels; ++i) {
    require(trunk[static_cast<size_t>(i)].stride == 2,
            "stem_pyramid: deeper trunk convs must be stride 2");
    // Level 1 consumes the input itself (shared-trunk reading of the
    // decomposition equations); deeper levels consume the previous stem.
    stems.push_back(conv2d(i == 1 ? x : stems[static_cast<size_t>(i - 1)],
                           trunk[static_cast<size_t>(i)]));
  }
  return stems;
}

// Bands ordered coarsest-first: bands[0] is the lowest-frequency component.
inline std::vector<Tensor> decompose_bands(const std::vector<Tensor>& stems) {
  const int levels = static_cast<int>(stems.size());
  std::vector<Tensor> bands;
  bands.reserve(static_cast<size_t>(levels));
  bands.push_back(stems[static_cast<size_t>(levels - 1)]);
  for (int i = levels - 2; i >= 0; --i)
    bands.push_back(sub(stems[static_cast<size_t>(i)],
                        bilinear_upsample(stems[static_cast<size_t>(i + 1)], 2)));
  return bands;
}

// Three-level convenience wrapper (the configuration of the equations).
inline FrequencyBands decompose(const Tensor& image, const FdStems& stems) {
  std::vector<Tensor> s = stem_pyramid(image, {stems.full, stems.half, stems.quarter});
  std::vector<Tensor> b = decompose_bands(s);
  FrequencyBands out;
  out.stem_full = s[0];
  out.stem_half = s[1];
  out.stem_quarter = s[2];
  out.f_low = b[0];
  out.f_mid = b[1];
  out.f_high = b[2];
  return out;
}

// ---------------------------------------------------------------------------
// Channel attention (squeeze-excite with reduction r)
// ---------------------------------------------------------------------------
struct ChannelAttention {
  Conv2dParams squeeze;  // 1x1, C -> C/r
  Conv2dParams excite;   // 1x1, C/r -> C
};

inline ChannelAttention make_channel_attention(int channels, int reduction, Rng& rng) {
  require(channels > 0 && reduction > 0, "make_channel_attention: bad dims");
  const int mid = std::max(1, channels / reduction);
  ChannelAttention ca;
  ca.squeeze = make_conv2d(channels, mid, 1, 1, rng);
  ca.excite = make_conv2d(mid, channels, 1, 1, rng);
  // Each squeeze row feeds exactly one scalar through the relu (the pooled
  // map is a single value per channel), so a row whose pre-activation starts
  // negative is effectively untrainable: pooled inputs are strongly
  // correlated across images and the gradient stays zero. Start every row
  // alive — tiny random weights with a positive bias — so the gate opens
  // near-neutral and training decides its direction.
  for (double& v : ca.squeeze.weight.mutable_values()) v *= 0.01;
  for (double& v : ca.squeeze.bias.mutable_values()) v = 0.25;
  return ca;
}

// Per-channel gate in (0,1) applied to x.
inline Tensor channel_attention(const Tensor& x, const ChannelAttention& ca) {
  Tensor s = global_avg_pool(x);
  s = relu(conv2d(s, ca.squeeze));
  s = sigmoid(conv2d(s, ca.excite));
  return mul(x, s);  // (N,C,H,W) * (N,C,1,1)
}

// ---------------------------------------------------------------------------
// Frequency Enhancement Unit
// ---------------------------------------------------------------------------
struct FeuStage {
  Conv2dParams conv;  // 3x3, in = C*(1+#previous stages), out = C
  std::optional<ChannelAttention> ca;
};

struct FeuParams {
  std::vector<FeuStage> stages;
  Conv2dParams fusion;  // 1x1 over the concatenated stage outputs
};

inline FeuParams make_feu(int channels, int stages, int ca_reduction,
                          bool with_attention, Rng& rng) {
  require(stages >= 1, "make_feu: need at least one stage");
  FeuParams p;
  for (int s = 0; s < stages; ++s) {
    FeuStage st;
    st.conv = make_conv2d(channels * (s + 1), channels, 3, 1, rng);
    if (with_attention) st.ca = make_channel_attention(channels, ca_reduction, rng);
    p.stages.push_back(std::move(st));
  }
  p.fusion = make_conv2d(channels * stages, channels, 1, 1, rng);
  return p;
}

// Dense cascade: stage i reads concat(x, out_1..out_{i-1}); each stage output
// is channel-attention rescaled before joining the pool; 1x1 fusion over the
// stage outputs; residual back to x.
inline Tensor feu_forward(const Tensor& x, const FeuParams& p) {
  require(x.defined() && x.ndim() == 4, "feu_forward: input must be 4-D");
  require(!p.stages.empty(), "feu_forward: no stages");
  if (x.dim(1) != p.stages[0].conv.in_channels())
    fail("feu_forward: input has ", x.dim(1), " channels, FEU expects ",
         p.stages[0].conv.in_channels());
  std::vector<Tensor> pool{x};
  std::vector<Tensor> outs;
  for (const FeuStage& st : p.stages) {
    Tensor in = pool.size() == 1 ? x : concat_channels(pool);
    Tensor h = relu(conv2d(in, st.conv));
    if (st.ca) h = channel_attention(h, *st.ca);
    outs.push_back(h);
    pool.push_back(h);
  }
  Tensor fused = conv2d(outs.size() == 1 ? outs[0] : concat_channels(outs), p.fusion);
  return add(fused, x);
}

// ---------------------------------------------------------------------------
// Branch enhancement with cross-branch feeds
// ---------------------------------------------------------------------------
struct BranchParams {
  Conv2dParams entry;  // 1x1: band channels + adapted feed channels -> width
  // feed_adapters[j] adapts the enhanced output of (coarser) branch j.
  std::vector<Conv2dParams> feed_adapters;
  std::vector<FeuParams> feus;
};

// bands and the result are ordered coarsest-first.
inline std::vector<Tensor> enhance(const std::vector<Tensor>& bands,
                                   const std::vector<BranchParams>& branches) {
  require(bands.size() == branches.size(), "enhance: bands/branches mismatch");
  std::vector<Tensor> enhanced;
  enhanced.reserve(bands.size());
  for (size_t i = 0; i < bands.size(); ++i) {
    const BranchParams& bp = branches[i];
    require(bp.feed_adapters.size() == i, "enhance: adapter count mismatch");
    std::vector<Tensor> cat{bands[i]};
    // Nearest coarser branch first, matching the order of the enhancement
    // equations: concat(band, up2(prev) adapted, up4(prev-prev) adapted, ...)
    for (size_t j = i; j-- > 0;) {
      const int factor = 1 << (i - j);
      Tensor fed = bilinear_upsample(enhanced[j], factor);
      cat.push_back(conv2d(fed, bp.feed_adapters[j]));
    }
    Tensor t = conv2d(cat.size() == 1 ? cat[0] : concat_channels(cat), bp.entry);
    for (const FeuParams& feu : bp.feus) t = feu_forward(t, feu);
    enhanced.push_back(t);
  }
  return enhanced;
}

}  // namespace ornet
