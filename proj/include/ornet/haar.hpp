// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Orthonormal 2-D Haar wavelet analysis.
//
// The transform is the measurement instrument of this project: it quantifies
// how image energy distributes across spatial-frequency bands, which is how
// we verify that degradations remove fine detail and that the network's
// low-frequency branch really does carry coarser content than its
// high-frequency branch. The orthonormal normalization (every analysis vector
// has unit norm) makes energy exactly conserved across the transform, so
// band "energy shares" are well-defined fractions of the plain sum of
// squares of the input.
//
// Conventions:
//   * Levels are 1-based; level 1 is the finest (full-resolution details).
//   * A pyramid with L levels holds 3L detail planes (LH, HL, HH per level)
//     plus one low-pass plane LL at level L.
//   * For a 2x2 block [[a, b], [c, d]] (a, b the top row) one analysis step
//     produces
//         LL = (a + b + c + d) / 2      LH = (a + b - c - d) / 2
//         HL = (a - b + c - d) / 2      HH = (a - b - c + d) / 2
//     i.e. LH responds to vertical variation (horizontal edges), HL to
//     horizontal variation, HH to diagonal variation.
#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ornet/plane.hpp"
#include "ornet/tensor.hpp"

namespace ornet {

inline constexpr int kDefaultHaarLevels = 4;

struct HaarLevel {
  Plane lh, hl, hh;
};

struct HaarPyramid {
  std::vector<HaarLevel> details;  // details[0] is level 1 (finest)
  Plane ll;                        // low-pass residue at the coarsest level
  int levels() const { return static_cast<int>(details.size()); }
};

inline double plane_energy(const Plane& p) {
  double e = 0.0;
  for (double v : p.v) e += v * v;
  return e;
}

// Largest level count L such that 2^L divides both dimensions. Useful when
// profiling feature maps whose sizes are not multiples of 2^kDefaultHaarLevels.
inline int max_haar_levels(int h, int w) {
  int l = 0;
  while (l < 30 && h % 2 == 0 && w % 2 == 0) {
    ++l;
    h /= 2;
    w /= 2;
  }
  return l;
}

namespace detail {

// One analysis step: (h, w) plane -> four (h/2, w/2) planes.
inline void haar_step(const Plane& in, Plane& ll, HaarLevel& out) {
  const int h2 = in.h / 2, w2 = in.w / 2;
  ll = make_plane(h2, w2);
  out.lh = make_plane(h2, w2);
  out.hl = make_plane(h2, w2);
  out.hh = make_plane(h2, w2);
  for (int y = 0; y < h2; ++y) {
    for (int x = 0; x < w2; ++x) {
      const double a = in.at(2 * y, 2 * x);
      const double b = in.at(2 * y, 2 * x + 1);
      const double c = in.at(2 * y + 1, 2 * x);
      const double d = in.at(2 * y + 1, 2 * x + 1);
      ll.at(y, x) = 0.5 * (a + b + c + d);
      out.lh.at(y, x) = 0.5 * (a + b - c - d);
      out.hl.at(y, x) = 0.5 * (a - b + c - d);
      out.hh.at(y, x) = 0.5 * (a - b - c + d);
    }
  }
}

// One synthesis step: four (h, w) planes -> (2h, 2w) plane.
inline Plane haar_unstep(const Plane& ll, const HaarLevel& d) {
  Plane out = make_plane(ll.h * 2, ll.w * 2);
  for (int y = 0; y < ll.h; ++y) {
    for (int x = 0; x < ll.w; ++x) {
      const double s = ll.at(y, x), v = d.lh.at(y, x), u = d.hl.at(y, x),
                   g = d.hh.at(y, x);
      out.at(2 * y, 2 * x) = 0.5 * (s + v + u + g);
      out.at(2 * y, 2 * x + 1) = 0.5 * (s + v - u - g);
      out.at(2 * y + 1, 2 * x) = 0.5 * (s - v + u - g);
      out.at(2 * y + 1, 2 * x + 1) = 0.5 * (s - v - u + g);
    }
  }
  return out;
}

}  // namespace detail

inline HaarPyramid haar_dwt2(const Plane& x, int levels = kDefaultHaarLevels) {
  require(levels >= 1, "haar_dwt2: levels must be >= 1");
  const int div = 1 << levels;
  if (x.h % div != 0 || x.w % div != 0)
    fail("haar_dwt2: plane ", x.h, "x", x.w, " not divisible by 2^", levels);
  HaarPyramid p;
  p.details.resize(static_cast<size_t>(levels));
  Plane cur = x;
  for (int l = 0; l < levels; ++l) {
    Plane next;
    detail::haar_step(cur, next, p.details[static_cast<size_t>(l)]);
    cur = std::move(next);
  }
  p.ll = std::move(cur);
  return p;
}

inline Plane haar_idwt2(const HaarPyramid& p) {
  require(p.levels() >= 1, "haar_idwt2: empty pyramid");
  Plane cur = p.ll;
  for (int l = p.levels() - 1; l >= 0; --l)
    cur = detail::haar_unstep(cur, p.details[static_cast<size_t>(l)]);
  return cur;
}

// ---------------------------------------------------------------------------
// Band energy profiles.
// ---------------------------------------------------------------------------

struct BandEnergyProfile {
  struct Entry {
    int level;
    std::string band;  // "LH", "HL", "HH" or "LL"
    double share;      // fraction of total energy, shares sum to 1
  };

  std::string tag;
  int levels = 0;
  bool zero_total = false;  // input had no energy; shares set uniform
  std::vector<Entry> entries;

  double share(int level, const std::string& band) const {
    for (const Entry& e : entries)
      if (e.level == level && e.band == band) return e.share;
    fail("BandEnergyProfile::share: no band ", band, " at level ", level);
  }

  // Total detail share at a level; `levels + 1` addresses the LL residue.
  double level_share(int level) const {
    double s = 0.0;
    bool found = false;
    for (const Entry& e : entries) {
      const int el = e.band == "LL" ? levels + 1 : e.level;
      if (el == level) {
        s += e.share;
        found = true;
      }
    }
    if (!found) fail("BandEnergyProfile::level_share: no level ", level);
    return s;
  }

  // Energy-weighted mean level. Detail bands weigh in at their own level;
  // the LL residue counts as level L+1 since it is coarser than every
  // detail band. Larger values mean coarser content.
  double mean_level() const {
    double m = 0.0;
    for (const Entry& e : entries)
      m += e.share * (e.band == "LL" ? levels + 1 : e.level);
    return m;
  }
};

inline BandEnergyProfile band_energy_profile(const HaarPyramid& p,
                                             std::string tag) {
  BandEnergyProfile prof;
  prof.tag = std::move(tag);
  prof.levels = p.levels();
  std::vector<double> energies;
  energies.reserve(static_cast<size_t>(3 * p.levels() + 1));
  for (int l = 0; l < p.levels(); ++l) {
    const HaarLevel& d = p.details[static_cast<size_t>(l)];
    energies.push_back(plane_energy(d.lh));
    energies.push_back(plane_energy(d.hl));
    energies.push_back(plane_energy(d.hh));
  }
  energies.push_back(plane_energy(p.ll));
  double total = 0.0;
  for (double e : energies) total += e;

  const char* names[3] = {"LH", "HL", "HH"};
  size_t idx = 0;
  const double uniform = 1.0 / static_cast<double>(energies.size());
  prof.zero_total = (total == 0.0);
  for (int l = 1; l <= p.levels(); ++l)
    for (int b = 0; b < 3; ++b, ++idx)
      prof.entries.push_back(
          {l, names[b], prof.zero_total ? uniform : energies[idx] / total});
  prof.entries.push_back(
      {p.levels(), "LL", prof.zero_total ? uniform : energies[idx] / total});
  return prof;
}

// Profile of the energy a degradation removed or displaced: band-wise squared
// difference between the wavelet coefficients of the clean image and of the
// degraded image upsampled back to the same size, measured on luma.
inline BandEnergyProfile degradation_profile(const Tensor& hr,
                                             const Tensor& degraded_up,
                                             int levels = kDefaultHaarLevels,
                                             std::string tag = "degradation") {
  Plane a = luma_plane(hr);
  Plane b = luma_plane(degraded_up);
  if (a.h != b.h || a.w != b.w)
    fail("degradation_profile: shapes ", a.h, "x", a.w, " vs ", b.h, "x", b.w);
  Plane diff = make_plane(a.h, a.w);
  for (size_t i = 0; i < diff.v.size(); ++i) diff.v[i] = a.v[i] - b.v[i];
  // |DWT(hr) - DWT(degraded)|^2 == |DWT(hr - degraded)|^2 by linearity.
  return band_energy_profile(haar_dwt2(diff, levels), std::move(tag));
}

// Profile of a feature map: analyze the channel-mean magnitude plane, which
// captures where (spatially, and after the DWT, at which scale) the feature
// tensor is active regardless of sign or channel.
inline BandEnergyProfile feature_band_profile(const Tensor& f,
                                              int levels = kDefaultHaarLevels,
                                              std::string tag = "feature") {
  return band_energy_profile(haar_dwt2(channel_mean_abs(f), levels),
                             std::move(tag));
}

inline void write_profile_csv(std::ostream& os,
                              const std::vector<BandEnergyProfile>& profiles) {
  os << "tag,level,band,energy_share\n";
  os << std::setprecision(17);
  for (const BandEnergyProfile& p : profiles)
    for (const BandEnergyProfile::Entry& e : p.entries)
      os << p.tag << "," << e.level << "," << e.band << "," << e.share << "\n";
}

}  // namespace ornet
