// Copyright (c) 2026 the ornet authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a flat key=value text format covering the model, the
// training recipe, and run plumbing (dataset manifest, output directory),
// plus command-line overrides.
//
// Principles:
//   * unknown keys are hard errors — a typo must never silently fall back to
//     a default;
//   * the effective configuration has a canonical text rendering with every
//     key explicit (defaults resolved), which is what gets echoed next to
//     outputs and hashed into checkpoints;
//   * canonical text parses back to an equivalent configuration, and doubles
//     are printed with enough digits to round-trip bitwise.
#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ornet/model.hpp"

namespace ornet {

// ---------------------------------------------------------------------------
// Training recipe (defaults follow the published recipe; desk-scale runs
// override them explicitly).
// ---------------------------------------------------------------------------
struct TrainConfig {
  double lr0 = 1e-4;       // initial learning rate
  double lr_decay = 0.5;   // per-epoch multiplicative decay
  int batch_size = 8;
  int crop = 192;          // HR-space square crop side
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_epochs = 1;
  std::uint64_t seed = 0;
  bool aug_flip = true;
  bool aug_rotate = true;
  bool aug_crop = true;
  int checkpoint_every = 1;  // epochs between checkpoint files (final always kept)
  int val_every = 1;         // epochs between validation passes (final always runs)

  void validate() const {
    auto bad = [](const std::string& m) { throw ConfigError(m); };
    if (!(lr0 > 0.0)) bad("lr0 must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) bad("lr_decay must be in (0,1]");
    if (batch_size < 1) bad("batch_size must be >= 1");
    if (crop < 1) bad("crop must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) bad("beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) bad("beta2 must be in [0,1)");
    if (!(eps > 0.0)) bad("eps must be positive");
    if (max_epochs < 1) bad("max_epochs must be >= 1");
    if (checkpoint_every < 1) bad("checkpoint_every must be >= 1");
    if (val_every < 1) bad("val_every must be >= 1");
  }
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string manifest;
  std::string out_dir = "out";
  int val_count = 1;  // deterministic last-k validation split
};

namespace detail {

// Shortest decimal rendering that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  for (int prec : {15, 16, 17}) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

inline std::string format_bool(bool b) { return b ? "true" : "false"; }

inline std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

inline std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline long long parse_ll(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const long long out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

inline int parse_int(const std::string& key, const std::string& v) {
  const long long x = parse_ll(key, v);
  if (x < -(1ll << 31) || x > (1ll << 31))
    throw ConfigError("config: integer out of range for " + key);
  return static_cast<int>(x);
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const unsigned long long out = std::stoull(v, &used);
    if (used != v.size() || v.empty() || v[0] == '-')
      throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: bad unsigned integer for " + key + ": '" + v +
                      "'");
  }
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v +
                    "' (use true/false/on/off/1/0)");
}

inline std::vector<int> parse_int_list(const std::string& key,
                                       const std::string& v) {
  std::vector<int> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) out.push_back(parse_int(key, trim(cur)));
  if (out.empty()) throw ConfigError("config: empty list for " + key);
  return out;
}

}  // namespace detail

inline std::string rfa_mode_name(RfaMode m) {
  switch (m) {
    case RfaMode::kDynamic: return "dynamic";
    case RfaMode::kPlainSpatialAttention: return "plain_spatial_attention";
    case RfaMode::kOff: return "off";
  }
  fail("rfa_mode_name: bad enum");
}

inline RfaMode rfa_mode_from(const std::string& v) {
  if (v == "dynamic") return RfaMode::kDynamic;
  if (v == "plain_spatial_attention") return RfaMode::kPlainSpatialAttention;
  if (v == "off") return RfaMode::kOff;
  throw ConfigError(
      "config: bad rfa_mode '" + v +
      "' (use dynamic, plain_spatial_attention or off)");
}

// ---------------------------------------------------------------------------
// key=value text parsing.
// ---------------------------------------------------------------------------

// Parses "key = value" lines. '#' starts a full-line comment; blank lines are
// skipped; duplicate keys within one source are errors.
inline std::map<std::string, std::string> parse_kv_text(
    std::istream& in, const std::string& source) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) +
                        ": expected key=value");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (value.empty())
      throw ConfigError(source + ":" + std::to_string(lineno) +
                        ": empty value for " + key);
    if (!kv.emplace(key, value).second)
      throw ConfigError(source + ":" + std::to_string(lineno) +
                        ": duplicate key " + key);
  }
  return kv;
}

namespace detail {

// Dispatch table: returns true if the key was recognized and applied.
inline bool apply_key(RunConfig& rc, const std::string& k,
                      const std::string& v) {
  ModelConfig& m = rc.model;
  TrainConfig& t = rc.train;
  if (k == "scale") m.scale = parse_int(k, v);
  else if (k == "branch_count") m.branch_count = parse_int(k, v);
  else if (k == "stem_channels") m.stem_channels = parse_int(k, v);
  else if (k == "branch_channels") m.branch_channels = parse_int_list(k, v);
  else if (k == "feu_counts") m.feu_counts = parse_int_list(k, v);
  else if (k == "feu_stages") m.feu_stages = parse_int(k, v);
  else if (k == "ca_reduction") m.ca_reduction = parse_int(k, v);
  else if (k == "feu_attention") m.feu_attention = parse_bool(k, v);
  else if (k == "rfa_mode") m.rfa_mode = rfa_mode_from(v);
  else if (k == "basis_kernels") m.basis_kernels = parse_int(k, v);
  else if (k == "rfa_kernel") m.rfa_kernel = parse_int(k, v);
  else if (k == "head_channels") m.head_channels = parse_int(k, v);
  else if (k == "lr0") t.lr0 = parse_double(k, v);
  else if (k == "lr_decay") t.lr_decay = parse_double(k, v);
  else if (k == "batch_size") t.batch_size = parse_int(k, v);
  else if (k == "crop") t.crop = parse_int(k, v);
  else if (k == "beta1") t.beta1 = parse_double(k, v);
  else if (k == "beta2") t.beta2 = parse_double(k, v);
  else if (k == "eps") t.eps = parse_double(k, v);
  else if (k == "max_epochs") t.max_epochs = parse_int(k, v);
  else if (k == "seed") t.seed = parse_u64(k, v);
  else if (k == "aug_flip") t.aug_flip = parse_bool(k, v);
  else if (k == "aug_rotate") t.aug_rotate = parse_bool(k, v);
  else if (k == "aug_crop") t.aug_crop = parse_bool(k, v);
  else if (k == "checkpoint_every") t.checkpoint_every = parse_int(k, v);
  else if (k == "val_every") t.val_every = parse_int(k, v);
  else if (k == "manifest") rc.manifest = v;
  else if (k == "out_dir") rc.out_dir = v;
  else if (k == "val_count") rc.val_count = parse_int(k, v);
  else return false;
  return true;
}

}  // namespace detail

// Builds a RunConfig from parsed key/value pairs. Unknown keys throw.
inline RunConfig run_config_from_kv(
    const std::map<std::string, std::string>& kv) {
  RunConfig rc;
  for (const auto& [k, v] : kv)
    if (!detail::apply_key(rc, k, v))
      throw ConfigError("config: unknown key '" + k + "'");
  rc.model.validate();
  rc.train.validate();
  if (rc.val_count < 0) throw ConfigError("val_count must be >= 0");
  if (rc.out_dir.empty()) throw ConfigError("out_dir must not be empty");
  return rc;
}

// Loads a config file and applies "key=value" override strings in order
// (later overrides win). The file may be omitted (empty path) to start from
// defaults, which is how ablation presets are built programmatically.
inline RunConfig load_run_config(const std::string& path,
                                 const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> kv;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    kv = parse_kv_text(in, path);
  }
  int n = 0;
  for (const std::string& ov : overrides) {
    ++n;
    const std::string source = "--set #" + std::to_string(n);
    const size_t eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError(source + ": expected KEY=VALUE, got '" + ov + "'");
    const std::string key = detail::trim(ov.substr(0, eq));
    const std::string value = detail::trim(ov.substr(eq + 1));
    if (value.empty())
      throw ConfigError(source + ": empty value for " + key);
    kv[key] = value;  // overrides may replace file keys
  }
  return run_config_from_kv(kv);
}

// ---------------------------------------------------------------------------
// Canonical rendering and hashing.
// ---------------------------------------------------------------------------

// Model section only: this is what decides checkpoint compatibility.
inline std::string canonical_model_text(const ModelConfig& m) {
  std::ostringstream os;
  os << "basis_kernels=" << m.basis_kernels << "\n"
     << "branch_channels=" << detail::format_int_list(m.resolved_branch_channels())
     << "\n"
     << "branch_count=" << m.branch_count << "\n"
     << "ca_reduction=" << m.ca_reduction << "\n"
     << "feu_attention=" << detail::format_bool(m.feu_attention) << "\n"
     << "feu_counts=" << detail::format_int_list(m.resolved_feu_counts()) << "\n"
     << "feu_stages=" << m.feu_stages << "\n"
     << "head_channels=" << m.head_channels << "\n"
     << "rfa_kernel=" << m.rfa_kernel << "\n"
     << "rfa_mode=" << rfa_mode_name(m.rfa_mode) << "\n"
     << "scale=" << m.scale << "\n"
     << "stem_channels=" << m.stem_channels << "\n";
  return os.str();
}

// Full canonical rendering: sorted key=value lines, one per key. Keys with an
// empty value (an unset manifest) are omitted so the text always parses back.
inline std::string canonical_text(const RunConfig& rc) {
  std::ostringstream os;
  os << canonical_model_text(rc.model)
     << "aug_crop=" << detail::format_bool(rc.train.aug_crop) << "\n"
     << "aug_flip=" << detail::format_bool(rc.train.aug_flip) << "\n"
     << "aug_rotate=" << detail::format_bool(rc.train.aug_rotate) << "\n"
     << "batch_size=" << rc.train.batch_size << "\n"
     << "beta1=" << detail::format_double(rc.train.beta1) << "\n"
     << "beta2=" << detail::format_double(rc.train.beta2) << "\n"
     << "checkpoint_every=" << rc.train.checkpoint_every << "\n"
     << "crop=" << rc.train.crop << "\n"
     << "eps=" << detail::format_double(rc.train.eps) << "\n"
     << "lr0=" << detail::format_double(rc.train.lr0) << "\n"
     << "lr_decay=" << detail::format_double(rc.train.lr_decay) << "\n";
  if (!rc.manifest.empty()) os << "manifest=" << rc.manifest << "\n";
  os << "max_epochs=" << rc.train.max_epochs << "\n"
     << "out_dir=" << rc.out_dir << "\n"
     << "seed=" << rc.train.seed << "\n"
     << "val_count=" << rc.val_count << "\n"
     << "val_every=" << rc.train.val_every << "\n";
  return os.str();
}

// Fingerprint used for checkpoint compatibility checks.
inline std::uint64_t model_config_hash(const ModelConfig& m) {
  return fnv1a64(canonical_model_text(m));
}

inline bool is_model_key(const std::string& k) {
  static const char* const keys[] = {
      "scale",        "branch_count", "stem_channels", "branch_channels",
      "feu_counts",   "feu_stages",   "ca_reduction",  "feu_attention",
      "rfa_mode",     "basis_kernels", "rfa_kernel",   "head_channels"};
  for (const char* s : keys)
    if (k == s) return true;
  return false;
}

// Rebuilds a ModelConfig from canonical_model_text (checkpoint loads).
inline ModelConfig model_config_from_text(const std::string& text) {
  std::istringstream is(text);
  const auto kv = parse_kv_text(is, "checkpoint model config");
  RunConfig rc;
  for (const auto& [k, v] : kv)
    if (!is_model_key(k) || !detail::apply_key(rc, k, v))
      throw ConfigError("checkpoint model config: unknown key '" + k + "'");
  rc.model.validate();
  return rc.model;
}

}  // namespace ornet
