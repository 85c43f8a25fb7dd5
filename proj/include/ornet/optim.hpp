// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Adam with bias correction, in 64-bit arithmetic throughout.
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ornet/tensor.hpp"

namespace ornet {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::int64_t t = 0;

  void init(const std::vector<std::pair<std::string, Tensor>>& params) {
    m.clear();
    v.clear();
    for (const auto& [name, p] : params) {
      (void)name;
      m.emplace_back(static_cast<size_t>(p.numel()), 0.0);
      v.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    }
    t = 0;
  }

  bool initialized() const { return !m.empty(); }
};

// One update over the whole parameter list. Parameters with no gradient
// buffer (nothing flowed to them this step) are treated as zero-gradient:
// their moments decay but no fresh signal enters.
inline void adam_step(std::vector<std::pair<std::string, Tensor>>& params,
                      AdamState& state, double lr, const AdamConfig& cfg = {}) {
  if (!state.initialized()) state.init(params);
  if (state.m.size() != params.size())
    throw std::runtime_error("adam_step: state tracks a different parameter list");
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi].second;
    std::vector<double>& m = state.m[pi];
    std::vector<double>& v = state.v[pi];
    std::vector<double>& val = p.mutable_values();
    if (m.size() != val.size())
      throw std::runtime_error("adam_step: moment/parameter shape mismatch for " +
                               params[pi].first);
    const bool has_g = p.has_grad();
    const double* g = has_g ? p.grad().data() : nullptr;
    for (size_t i = 0; i < val.size(); ++i) {
      const double gi = has_g ? g[i] : 0.0;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// Learning rate at a (0-based) epoch: lr0 * decay^epoch.
inline double lr_at_epoch(double lr0, double decay, int epoch) {
  return lr0 * std::pow(decay, static_cast<double>(epoch));
}

}  // namespace ornet
