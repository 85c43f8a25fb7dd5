// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ornet {

// Configuration / usage errors that a CLI should map to exit code 2.
// Everything else (I/O failures, numeric blowups, ...) uses the std
// exception hierarchy directly and maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace detail

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  throw std::invalid_argument(detail::concat(args...));
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// mt19937_64 plus hand-rolled draw functions. The std::*_distribution
// wrappers are not pinned across standard library versions, so we never use
// them: every stream a run produces must be reproducible from the seed alone,
// on any platform, forever (checkpoints serialize the engine state).
// ---------------------------------------------------------------------------
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform in [0, 1): 53 random mantissa bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection-free modulo is fine here: n is
  // always tiny compared to 2^64, so the bias is ~n/2^64.
  std::int64_t uniform_int(std::int64_t n) {
    require(n > 0, "uniform_int: n must be positive");
    return static_cast<std::int64_t>(eng_() % static_cast<std::uint64_t>(n));
  }

  // Standard normal via Box-Muller. Stateless (no cached spare) so that
  // serializing the engine state alone fully captures the stream position.
  double normal() {
    // u1 in (0, 1] so the log is finite.
    double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)],
                v[static_cast<size_t>(uniform_int(i + 1))]);
    }
  }

  // Engine state round-trips through text; used by checkpoints.
  std::string serialize() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  static Rng deserialize(const std::string& s) {
    Rng r;
    std::istringstream is(s);
    is >> r.eng_;
    if (!is) throw std::runtime_error("Rng::deserialize: malformed state");
    return r;
  }

  bool operator==(const Rng& o) const { return eng_ == o.eng_; }

 private:
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// FNV-1a, used for config fingerprints in checkpoints.
// ---------------------------------------------------------------------------
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Little-endian primitive I/O for binary file formats.
// ---------------------------------------------------------------------------
namespace io {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

class Reader {
 public:
  Reader(const char* data, size_t size) : p_(data), end_(data + size) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }

  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string bytes(size_t n) {
    check(n);
    std::string s(p_, n);
    p_ += n;
    return s;
  }

  void f64_array(double* dst, size_t n) {
    check(8 * n);
    for (size_t i = 0; i < n; ++i) dst[i] = f64();
  }

  size_t remaining() const { return static_cast<size_t>(end_ - p_); }

 private:
  std::uint64_t uint(int nbytes) {
    check(static_cast<size_t>(nbytes));
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p_[i])) << (8 * i);
    p_ += nbytes;
    return v;
  }

  void check(size_t n) {
    if (remaining() < n) throw std::runtime_error("binary read past end of buffer");
  }

  const char* p_;
  const char* end_;
};

}  // namespace io
}  // namespace ornet
