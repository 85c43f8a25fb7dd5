// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end OR-Net: stem trunk -> frequency decomposition -> per-branch
// enhancement -> omni assembly -> region-adaptive aggregation -> small
// reconstruction head with a global residual from the (bicubically
// pre-upsampled) input. The network is resolution-preserving; the scale
// factor lives entirely in the data pipeline.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ornet/fd.hpp"
#include "ornet/rfa.hpp"

namespace ornet {

enum class RfaMode { kDynamic, kPlainSpatialAttention, kOff };

struct ModelConfig {
  int scale = 2;                     // data-pipeline scale (2, 3 or 4)
  int branch_count = 3;              // frequency branches (1..4)
  int stem_channels = 64;            // shared trunk width
  std::vector<int> branch_channels;  // empty -> defaults (128,128,64 at 3)
  std::vector<int> feu_counts;       // empty -> defaults (4,3,2 at 3)
  int feu_stages = 3;                // dense stages inside one FEU
  int ca_reduction = 8;              // channel-attention squeeze ratio
  bool feu_attention = true;         // Table-3 "FEU" switch
  RfaMode rfa_mode = RfaMode::kDynamic;  // Table-3 "RFA"/"SA" switch
  int basis_kernels = 5;             // m
  int rfa_kernel = 3;                // k of the basis kernels
  int head_channels = 64;

  // Branch lists are ordered coarsest-first. Defaults take the last
  // branch_count entries of the full-model tables, so the single-branch
  // ablation keeps the full-resolution branch's configuration.
  std::vector<int> resolved_branch_channels() const {
    if (!branch_channels.empty()) return branch_channels;
    static const std::vector<int> full{128, 128, 128, 64};
    return std::vector<int>(full.end() - branch_count, full.end());
  }

  std::vector<int> resolved_feu_counts() const {
    if (!feu_counts.empty()) return feu_counts;
    static const std::vector<int> full{4, 4, 3, 2};
    return std::vector<int>(full.end() - branch_count, full.end());
  }

  int divisibility() const { return 1 << (branch_count - 1); }

  int omni_channels() const {
    int c = 0;
    for (int v : resolved_branch_channels()) c += v;
    return c;
  }

  void validate() const {
    auto bad = [](const std::string& msg) { throw ConfigError(msg); };
    if (scale < 2 || scale > 4) bad("scale must be 2, 3 or 4");
    if (branch_count < 1 || branch_count > 4) bad("branch_count must be in 1..4");
    if (stem_channels < 1) bad("stem_channels must be positive");
    if (!branch_channels.empty() &&
        static_cast<int>(branch_channels.size()) != branch_count)
      bad("branch_channels must list one width per branch");
    if (!feu_counts.empty() && static_cast<int>(feu_counts.size()) != branch_count)
      bad("feu_counts must list one count per branch");
    for (int v : resolved_branch_channels())
      if (v < 1) bad("branch channel widths must be positive");
    for (int v : resolved_feu_counts())
      if (v < 1) bad("feu counts must be positive");
    if (feu_stages < 1) bad("feu_stages must be positive");
    if (ca_reduction < 1) bad("ca_reduction must be positive");
    if (basis_kernels < 1) bad("basis_kernels must be >= 1");
    if (rfa_kernel < 1 || rfa_kernel % 2 == 0) bad("rfa_kernel must be odd");
    if (head_channels < 1) bad("head_channels must be positive");
  }
};

class OrNet {
 public:
  OrNet(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int B = cfg_.branch_count;
    const std::vector<int> widths = cfg_.resolved_branch_channels();
    const std::vector<int> feus = cfg_.resolved_feu_counts();
    const int stem = cfg_.stem_channels;

    // Parameter creation order is the serialization order; keep it stable.
    trunk_.push_back(make_conv2d(3, stem, 3, 1, rng));
    for (int i = 1; i < B; ++i) trunk_.push_back(make_conv2d(i == 1 ? 3 : stem, stem, 3, 2, rng));

    for (int i = 0; i < B; ++i) {
      BranchParams bp;
      const int width = widths[static_cast<size_t>(i)];
      int entry_in = stem;
      bp.feed_adapters.resize(static_cast<size_t>(i));
      for (int j = i - 1; j >= 0; --j) {  // concat order: nearest coarser first
        bp.feed_adapters[static_cast<size_t>(j)] =
            make_conv2d(widths[static_cast<size_t>(j)], width, 1, 1, rng);
        entry_in += width;
      }
      bp.entry = make_conv2d(entry_in, width, 1, 1, rng);
      for (int f = 0; f < feus[static_cast<size_t>(i)]; ++f)
        bp.feus.push_back(make_feu(width, cfg_.feu_stages, cfg_.ca_reduction,
                                   cfg_.feu_attention, rng));
      branches_.push_back(std::move(bp));
    }

    const int omni = cfg_.omni_channels();
    switch (cfg_.rfa_mode) {
      case RfaMode::kDynamic:
        pool_ = make_kernel_pool(omni, omni, cfg_.rfa_kernel, cfg_.basis_kernels, rng);
        break;
      case RfaMode::kPlainSpatialAttention:
        // The degenerate m=1 pool: same code path, so equality with a
        // one-kernel dynamic configuration is bitwise.
        pool_ = make_kernel_pool(omni, omni, cfg_.rfa_kernel, 1, rng);
        break;
      case RfaMode::kOff:
        omni_fuse_ = make_conv2d(omni, omni, 1, 1, rng);
        break;
    }

    head_fuse_ = make_conv2d(omni, cfg_.head_channels, 1, 1, rng);
    head_conv1_ = make_conv2d(cfg_.head_channels, cfg_.head_channels, 3, 1, rng);
    head_conv2_ = make_conv2d(cfg_.head_channels, cfg_.head_channels, 3, 1, rng);
    head_out_ = make_conv2d(cfg_.head_channels, 3, 3, 1, rng);
    // Damp the initial residual so the model starts close to its identity
    // mapping (the pre-upsampled input); keeps early training stable without
    // creating dead gradient paths the way an exact-zero init would.
    for (double& v : head_out_.weight.mutable_values()) v *= 0.01;
  }

  struct Trace {
    std::vector<Tensor> stems;
    std::vector<Tensor> bands;     // coarsest-first
    std::vector<Tensor> enhanced;  // coarsest-first
    Tensor omni;
    AttentionMap attention;        // undefined tensor when rfa_mode == off
    Tensor aggregated;
    Tensor sr;
  };

  Trace forward_trace(const Tensor& x) const {
    require(x.defined() && x.ndim() == 4 && x.dim(1) == 3,
            "OrNet::forward: input must be (N,3,H,W)");
    const int div = cfg_.divisibility();
    if (div > 1 && (x.dim(2) % div != 0 || x.dim(3) % div != 0))
      fail("OrNet::forward: spatial dims ", x.dim(2), "x", x.dim(3),
           " must be divisible by ", div);

    Trace t;
    t.stems = stem_pyramid(x, trunk_);
    t.bands = decompose_bands(t.stems);
    t.enhanced = enhance(t.bands, branches_);
    t.omni = assemble_omni(t.enhanced);

    if (pool_) {
      t.attention = attention_map(t.omni, *pool_, cfg_.resolved_branch_channels());
      t.aggregated = aggregate(t.attention, t.omni);
    } else {
      t.aggregated = conv2d(t.omni, *omni_fuse_);
    }

    Tensor h = conv2d(t.aggregated, head_fuse_);
    h = relu(conv2d(h, head_conv1_));
    h = relu(conv2d(h, head_conv2_));
    t.sr = add(conv2d(h, head_out_), x);  // global residual
    return t;
  }

  Tensor forward(const Tensor& x) const { return forward_trace(x).sr; }

  const ModelConfig& config() const { return cfg_; }

  // Stable name -> tensor registry, in construction order.
  std::vector<std::pair<std::string, Tensor>> named_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto conv = [&out](const std::string& name, const Conv2dParams& p) {
      out.emplace_back(name + ".weight", p.weight);
      if (p.bias.defined()) out.emplace_back(name + ".bias", p.bias);
    };
    for (size_t i = 0; i < trunk_.size(); ++i)
      conv("stem" + std::to_string(i), trunk_[static_cast<size_t>(i)]);
    for (size_t i = 0; i < branches_.size(); ++i) {
      const std::string b = "branch" + std::to_string(i);
      const BranchParams& bp = branches_[i];
      for (size_t j = 0; j < bp.feed_adapters.size(); ++j)
        conv(b + ".feed" + std::to_string(j), bp.feed_adapters[j]);
      conv(b + ".entry", bp.entry);
      for (size_t f = 0; f < bp.feus.size(); ++f) {
        const std::string fn = b + ".feu" + std::to_string(f);
        const FeuParams& feu = bp.feus[f];
        for (size_t s = 0; s < feu.stages.size(); ++s) {
          const std::string sn = fn + ".stage" + std::to_string(s);
          conv(sn + ".conv", feu.stages[s].conv);
          if (feu.stages[s].ca) {
            conv(sn + ".ca.squeeze", feu.stages[s].ca->squeeze);
            conv(sn + ".ca.excite", feu.stages[s].ca->excite);
          }
        }
        conv(fn + ".fusion", feu.fusion);
      }
    }
    if (pool_) {
      out.emplace_back("rfa.basis", pool_->basis);
      conv("rfa.embed", pool_->embedding);
    }
    if (omni_fuse_) conv("fuse", *omni_fuse_);
    conv("head.fuse", head_fuse_);
    conv("head.conv1", head_conv1_);
    conv("head.conv2", head_conv2_);
    conv("head.out", head_out_);
    return out;
  }

  void zero_grads() const {
    auto params = named_params();
    for (auto& [name, t] : params) t.zero_grad();
  }

 private:
  ModelConfig cfg_;
  std::vector<Conv2dParams> trunk_;
  std::vector<BranchParams> branches_;
  std::optional<KernelPool> pool_;
  std::optional<Conv2dParams> omni_fuse_;
  Conv2dParams head_fuse_, head_conv1_, head_conv2_, head_out_;
};

}  // namespace ornet
