// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset plumbing: aligned LR/HR patch pairs, synthetic degradations for
// desk-scale experiments, a deterministic synthetic scene generator, and the
// tab-separated dataset manifest.
//
// Degradation kinds:
//   * bicubic     — the conventional SISR setting: LR = bicubic downscale.
//   * blur_noise  — the realistic setting: Gaussian blur (sigma in [1, 2]),
//                   bicubic downscale, then additive Gaussian noise
//                   (sigma_n in [0.01, 0.03]); parameters drawn per sample.
// With blur 0 and noise 0 the blur_noise pipeline reduces bitwise to the
// bicubic kind; both clamp the LR result to [0, 1].
#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ornet/image.hpp"
#include "ornet/resample.hpp"
#include "ornet/tensor.hpp"

namespace ornet {

struct PatchPair {
  Tensor lr;              // (3, h, w)
  Tensor hr;              // (3, s*h, s*w)
  int scale = 0;
  std::string source_id;
  std::string tag;        // "real", "bicubic" or "blur_noise"
};

// Checks the exact s-fold spatial relationship between the members.
inline void validate_pair(const PatchPair& p) {
  require(p.scale >= 1, "PatchPair: scale must be >= 1");
  require(p.lr.defined() && p.hr.defined() && p.lr.ndim() == 3 &&
              p.hr.ndim() == 3 && p.lr.dim(0) == 3 && p.hr.dim(0) == 3,
          "PatchPair: members must be (3,H,W) tensors");
  if (p.hr.dim(1) != p.lr.dim(1) * p.scale ||
      p.hr.dim(2) != p.lr.dim(2) * p.scale)
    fail("PatchPair: hr ", p.hr.dim(1), "x", p.hr.dim(2), " is not ", p.scale,
         "x the lr ", p.lr.dim(1), "x", p.lr.dim(2));
}

namespace detail {

inline Tensor clamp01(Tensor t) {
  for (double& v : t.mutable_values()) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return t;
}

}  // namespace detail

struct DegradationParams {
  double blur_sigma = 0.0;   // 0 disables the blur stage
  double noise_sigma = 0.0;  // 0 disables the noise stage
};

// Core degradation pipeline with explicit parameters. Noise draws (if any)
// consume the rng in row-major element order.
inline PatchPair degrade_with_params(const Tensor& hr, int scale,
                                     const DegradationParams& dp, Rng& rng,
                                     std::string tag,
                                     std::string source_id = "synthetic") {
  require(hr.defined() && hr.ndim() == 3 && hr.dim(0) == 3,
          "synthesize_degradation: hr must be (3,H,W)");
  require(scale >= 1, "synthesize_degradation: scale must be >= 1");
  if (hr.dim(1) < scale || hr.dim(2) < scale)
    fail("synthesize_degradation: hr ", hr.dim(1), "x", hr.dim(2),
         " smaller than scale ", scale);
  if (hr.dim(1) % scale != 0 || hr.dim(2) % scale != 0)
    fail("synthesize_degradation: hr ", hr.dim(1), "x", hr.dim(2),
         " not divisible by scale ", scale);
  require(dp.blur_sigma >= 0.0 && dp.noise_sigma >= 0.0,
          "synthesize_degradation: negative sigma");

  Tensor blurred = dp.blur_sigma > 0.0 ? gaussian_blur(hr, dp.blur_sigma) : hr;
  Tensor lr = bicubic_resize(blurred, hr.dim(1) / scale, hr.dim(2) / scale);
  if (dp.noise_sigma > 0.0) {
    for (double& v : lr.mutable_values()) v += rng.normal(0.0, dp.noise_sigma);
  }
  PatchPair out;
  out.lr = detail::clamp01(std::move(lr));
  out.hr = hr;
  out.scale = scale;
  out.source_id = std::move(source_id);
  out.tag = std::move(tag);
  validate_pair(out);
  return out;
}

// Draws the degradation parameters for `kind` and runs the pipeline.
inline PatchPair synthesize_degradation(const Tensor& hr,
                                        const std::string& kind, int scale,
                                        Rng& rng,
                                        std::string source_id = "synthetic") {
  DegradationParams dp;
  if (kind == "bicubic") {
    // No draws: the bicubic kind must not advance the rng.
  } else if (kind == "blur_noise") {
    dp.blur_sigma = rng.uniform(1.0, 2.0);
    dp.noise_sigma = rng.uniform(0.01, 0.03);
  } else {
    fail("synthesize_degradation: unknown kind '", kind,
         "' (use bicubic or blur_noise)");
  }
  return degrade_with_params(hr, scale, dp, rng, kind, std::move(source_id));
}

// ---------------------------------------------------------------------------
// Synthetic scenes.
//
// Deterministic per seed, with content spread across frequency bands: a
// smooth two-way gradient (coarse), a few solid rectangles (edges at mixed
// scales), and sinusoidal texture patches (fine detail). Values in [0, 1].
// ---------------------------------------------------------------------------
inline Tensor synthetic_scene(int h, int w, Rng& rng) {
  require(h >= 8 && w >= 8, "synthetic_scene: size must be at least 8x8");
  Tensor img = Tensor::zeros({3, h, w});
  auto& v = img.mutable_values();
  const size_t plane = static_cast<size_t>(h) * w;

  // Smooth background: per-channel corner values, bilinearly interpolated.
  double corners[3][4];
  for (auto& c : corners)
    for (double& x : c) x = rng.uniform(0.1, 0.9);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double fy = h > 1 ? static_cast<double>(y) / (h - 1) : 0.0;
        const double fx = w > 1 ? static_cast<double>(x) / (w - 1) : 0.0;
        const double top = corners[c][0] * (1 - fx) + corners[c][1] * fx;
        const double bot = corners[c][2] * (1 - fx) + corners[c][3] * fx;
        v[c * plane + static_cast<size_t>(y) * w + x] =
            top * (1 - fy) + bot * fy;
      }

  // Solid rectangles.
  const int n_rects = 3 + static_cast<int>(rng.uniform_int(3));
  for (int r = 0; r < n_rects; ++r) {
    const int rh = 2 + static_cast<int>(rng.uniform_int(h / 2));
    const int rw = 2 + static_cast<int>(rng.uniform_int(w / 2));
    const int y0 = static_cast<int>(rng.uniform_int(h - rh + 1));
    const int x0 = static_cast<int>(rng.uniform_int(w - rw + 1));
    double col[3] = {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0),
                     rng.uniform(0.0, 1.0)};
    for (int c = 0; c < 3; ++c)
      for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x)
          v[c * plane + static_cast<size_t>(y) * w + x] = col[c];
  }

  // Sinusoidal texture patches riding on whatever is underneath.
  const int n_tex = 2 + static_cast<int>(rng.uniform_int(2));
  for (int t = 0; t < n_tex; ++t) {
    const int th = h / 4 + static_cast<int>(rng.uniform_int(h / 4 + 1));
    const int tw = w / 4 + static_cast<int>(rng.uniform_int(w / 4 + 1));
    const int y0 = static_cast<int>(rng.uniform_int(h - th + 1));
    const int x0 = static_cast<int>(rng.uniform_int(w - tw + 1));
    const double fy = rng.uniform(0.5, 2.2);   // cycles per pixel * 2*pi
    const double fx = rng.uniform(0.5, 2.2);
    const double amp = rng.uniform(0.08, 0.22);
    const double phase = rng.uniform(0.0, 6.28318530717958647692);
    for (int c = 0; c < 3; ++c)
      for (int y = y0; y < y0 + th; ++y)
        for (int x = x0; x < x0 + tw; ++x) {
          double& px = v[c * plane + static_cast<size_t>(y) * w + x];
          px += amp * std::sin(fy * y + fx * x + phase);
        }
  }
  return detail::clamp01(std::move(img));
}

// ---------------------------------------------------------------------------
// Dataset manifest.
//
// One entry per line, tab-separated:
//   hr_path<TAB>lr_path<TAB>scale          a real pair on disk
//   hr_path<TAB>SYNTH:<kind><TAB>scale     degrade hr_path on the fly
// Blank lines and lines starting with '#' are skipped. Relative paths are
// resolved against the manifest's own directory.
// ---------------------------------------------------------------------------
struct ManifestEntry {
  std::string hr_path;
  std::string lr_spec;  // path or "SYNTH:<kind>"
  int scale = 0;
};

inline std::vector<ManifestEntry> parse_manifest(std::istream& in,
                                                 const std::string& name) {
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) +
                        ": expected hr<TAB>lr<TAB>scale");
    ManifestEntry e;
    e.hr_path = line.substr(0, t1);
    e.lr_spec = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string scale_str = line.substr(t2 + 1);
    try {
      size_t used = 0;
      e.scale = std::stoi(scale_str, &used);
      if (used != scale_str.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(name + ":" + std::to_string(lineno) +
                        ": bad scale '" + scale_str + "'");
    }
    if (e.scale < 1)
      throw ConfigError(name + ":" + std::to_string(lineno) +
                        ": scale must be >= 1");
    if (e.hr_path.empty() || e.lr_spec.empty())
      throw ConfigError(name + ":" + std::to_string(lineno) + ": empty field");
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::vector<ManifestEntry> parse_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  return parse_manifest(in, path);
}

namespace detail {

inline std::string dir_of(const std::string& path) {
  const size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string() : path.substr(0, slash + 1);
}

inline std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || p[0] == '/' || base.empty()) return p;
  return base + p;
}

}  // namespace detail

// Loads every manifest entry into memory. Synthetic entries consume `rng` in
// manifest order, so a fixed seed reproduces the dataset exactly.
inline std::vector<PatchPair> load_dataset(const std::string& manifest_path,
                                           Rng& rng) {
  const std::string base = detail::dir_of(manifest_path);
  std::vector<PatchPair> out;
  for (const ManifestEntry& e : parse_manifest(manifest_path)) {
    const std::string hr_path = detail::resolve(base, e.hr_path);
    Tensor hr = decode_image(hr_path);
    if (e.lr_spec.rfind("SYNTH:", 0) == 0) {
      out.push_back(synthesize_degradation(hr, e.lr_spec.substr(6), e.scale,
                                           rng, e.hr_path));
    } else {
      PatchPair p;
      p.hr = std::move(hr);
      p.lr = decode_image(detail::resolve(base, e.lr_spec));
      p.scale = e.scale;
      p.source_id = e.hr_path;
      p.tag = "real";
      validate_pair(p);
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace ornet
