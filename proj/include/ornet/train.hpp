#pragma once
// Training: augmentation, checkpointing, and the training loop.
//
// Determinism is the organizing principle. One Rng stream drives everything
// in a fixed order — model init, per-epoch shuffles, per-patch augmentation
// draws — and the checkpoint stores that stream's state, so a resumed run
// replays the exact trajectory of an uninterrupted one, bitwise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ornet/common.hpp"
#include "ornet/config.hpp"
#include "ornet/data.hpp"
#include "ornet/metrics.hpp"
#include "ornet/model.hpp"
#include "ornet/optim.hpp"
#include "ornet/resample.hpp"

namespace ornet {

// ---------------------------------------------------------------------------
// Geometry ops on (C,H,W) value tensors.
//
// These are data-preparation transforms, not differentiable ops: they build
// fresh constant tensors. The coordinate conventions are frozen contracts
// (tests pin them with index-arithmetic oracles):
//   hflip:  out(y, x) = in(y, W-1-x)
//   vflip:  out(y, x) = in(H-1-y, x)
//   rot90:  one clockwise quarter turn, out(y, x) = in(H-1-x, y), shape
//           (C,H,W) -> (C,W,H)
// ---------------------------------------------------------------------------

namespace detail {

inline void check_chw(const Tensor& t, const char* who) {
  if (!t.defined() || t.ndim() != 3)
    fail(who, ": expected a (C,H,W) tensor");
}

}  // namespace detail

inline Tensor crop_chw(const Tensor& t, int y0, int x0, int h, int w) {
  detail::check_chw(t, "crop_chw");
  const int c = t.dim(0), th = t.dim(1), tw = t.dim(2);
  require(h > 0 && w > 0, "crop_chw: empty crop");
  if (y0 < 0 || x0 < 0 || y0 + h > th || x0 + w > tw)
    fail("crop_chw: window [", y0, ",", x0, "] ", h, "x", w,
         " exceeds input ", th, "x", tw);
  std::vector<double> out(static_cast<size_t>(c) * h * w);
  const auto& in = t.values();
  size_t o = 0;
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[o++] = in[(static_cast<size_t>(ci) * th + y0 + y) * tw + x0 + x];
  return Tensor::from_data({c, h, w}, std::move(out));
}

inline Tensor hflip_chw(const Tensor& t) {
  detail::check_chw(t, "hflip_chw");
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  std::vector<double> out(t.values().size());
  const auto& in = t.values();
  size_t o = 0;
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[o++] = in[(static_cast<size_t>(ci) * h + y) * w + (w - 1 - x)];
  return Tensor::from_data({c, h, w}, std::move(out));
}

inline Tensor vflip_chw(const Tensor& t) {
  detail::check_chw(t, "vflip_chw");
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  std::vector<double> out(t.values().size());
  const auto& in = t.values();
  size_t o = 0;
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[o++] = in[(static_cast<size_t>(ci) * h + (h - 1 - y)) * w + x];
  return Tensor::from_data({c, h, w}, std::move(out));
}

// `quarter_turns` clockwise quarter turns (any integer; reduced mod 4).
inline Tensor rot90_chw(const Tensor& t, int quarter_turns) {
  detail::check_chw(t, "rot90_chw");
  int q = quarter_turns % 4;
  if (q < 0) q += 4;
  Tensor cur = t;
  for (int i = 0; i < q; ++i) {
    const int c = cur.dim(0), h = cur.dim(1), w = cur.dim(2);
    std::vector<double> out(cur.values().size());
    const auto& in = cur.values();
    size_t o = 0;
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y < w; ++y)          // output height = input width
        for (int x = 0; x < h; ++x)        // output width  = input height
          out[o++] = in[(static_cast<size_t>(ci) * h + (h - 1 - x)) * w + y];
    cur = Tensor::from_data({c, w, h}, std::move(out));
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Augmentation: random crop, flip, rotation — applied identically to both
// members of a pair, with crop coordinates drawn in LR space and scaled up
// so the patches stay aligned.
// ---------------------------------------------------------------------------

struct AugmentOptions {
  bool flip = true;
  bool rotate = true;
  bool crop = true;
  int crop_hr = 192;  // HR-space square side; must be a multiple of scale

  static AugmentOptions from(const TrainConfig& t) {
    return {t.aug_flip, t.aug_rotate, t.aug_crop, t.crop};
  }
};

// Draw order is a frozen contract (resume determinism depends on it):
// crop y, crop x, flip selector in {0 identity, 1 h-flip, 2 v-flip},
// rotation selector in {0,1,2,3} clockwise quarter turns. Disabled stages
// draw nothing.
inline PatchPair augment(const PatchPair& p, const AugmentOptions& o,
                         Rng& rng) {
  validate_pair(p);
  Tensor lr = p.lr;
  Tensor hr = p.hr;
  if (o.crop) {
    require(o.crop_hr >= 1, "augment: crop size must be positive");
    if (o.crop_hr % p.scale != 0)
      fail("augment: crop ", o.crop_hr, " is not a multiple of scale ",
           p.scale);
    if (o.crop_hr > hr.dim(1) || o.crop_hr > hr.dim(2))
      fail("augment: crop ", o.crop_hr, " larger than image ", hr.dim(1),
           "x", hr.dim(2));
    const int cl = o.crop_hr / p.scale;
    const int y = static_cast<int>(rng.uniform_int(lr.dim(1) - cl + 1));
    const int x = static_cast<int>(rng.uniform_int(lr.dim(2) - cl + 1));
    lr = crop_chw(lr, y, x, cl, cl);
    hr = crop_chw(hr, y * p.scale, x * p.scale, o.crop_hr, o.crop_hr);
  }
  if (o.flip) {
    const int f = static_cast<int>(rng.uniform_int(3));
    if (f == 1) {
      lr = hflip_chw(lr);
      hr = hflip_chw(hr);
    } else if (f == 2) {
      lr = vflip_chw(lr);
      hr = vflip_chw(hr);
    }
  }
  if (o.rotate) {
    const int q = static_cast<int>(rng.uniform_int(4));
    if (q != 0) {
      lr = rot90_chw(lr, q);
      hr = rot90_chw(hr, q);
    }
  }
  return {lr, hr, p.scale, p.source_id, p.tag};
}

// Stacks same-shaped (C,H,W) tensors into one (B,C,H,W) constant batch.
inline Tensor stack_batch(const std::vector<Tensor>& items) {
  require(!items.empty(), "stack_batch: empty batch");
  detail::check_chw(items[0], "stack_batch");
  const int c = items[0].dim(0), h = items[0].dim(1), w = items[0].dim(2);
  const size_t per = items[0].values().size();
  std::vector<double> out;
  out.reserve(per * items.size());
  for (const Tensor& t : items) {
    detail::check_chw(t, "stack_batch");
    if (t.dim(0) != c || t.dim(1) != h || t.dim(2) != w)
      fail("stack_batch: mixed patch shapes ", detail::shape_str(t.shape()),
           " vs ", detail::shape_str(items[0].shape()),
           " (enable cropping or use a uniform-size dataset)");
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  return Tensor::from_data({static_cast<int>(items.size()), c, h, w},
                           std::move(out));
}

namespace detail {

// (1,C,H,W) -> (C,H,W) value view for metric computation.
inline Tensor squeeze_batch1(const Tensor& t) {
  require(t.defined() && t.ndim() == 4 && t.dim(0) == 1,
          "squeeze_batch1: expected a (1,C,H,W) tensor");
  return Tensor::from_data({t.dim(1), t.dim(2), t.dim(3)}, t.values());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Checkpoints.
//
// Binary layout, version 1 (all integers little-endian, all floats IEEE-754
// binary64 little-endian):
//
//   "ORNT"                     4-byte magic
//   u32  version               = 1
//   u64  model_hash            fnv1a64 of the canonical model text
//   u64  len, bytes            canonical model text
//   u64  epoch                 completed epochs
//   u64  step                  completed optimizer steps
//   u64  len, bytes            Rng state escaped as text
//   u32  n_params
//   per parameter, in named_params() order:
//     u64 len, bytes           name
//     u32 ndim, u32 dims[ndim]
//     f64 values[numel]
//   u8   has_adam              0 or 1
//   if has_adam:
//     u64 adam_t
//     per parameter: f64 m[numel], then f64 v[numel]
//
// The file must end exactly there; trailing bytes mean corruption.
// ---------------------------------------------------------------------------

struct Checkpoint {
  std::uint32_t version = 1;
  std::uint64_t model_hash = 0;
  std::string model_text;  // canonical model section; rebuilds the config
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  std::string rng_state;

  std::vector<std::string> names;
  std::vector<std::vector<int>> shapes;
  std::vector<std::vector<double>> values;

  bool has_adam = false;
  std::int64_t adam_t = 0;
  std::vector<std::vector<double>> adam_m, adam_v;
};

// Captures the full training state. Pass adam = nullptr for a weights-only
// snapshot (e.g. an export after training).
inline Checkpoint snapshot(const OrNet& model, const AdamState* adam,
                           std::uint64_t epoch, std::uint64_t step,
                           const Rng& rng) {
  Checkpoint cp;
  cp.model_text = canonical_model_text(model.config());
  cp.model_hash = fnv1a64(cp.model_text);
  cp.epoch = epoch;
  cp.step = step;
  cp.rng_state = rng.serialize();
  const auto params = model.named_params();
  for (const auto& [name, p] : params) {
    cp.names.push_back(name);
    cp.shapes.push_back(p.shape());
    cp.values.push_back(p.values());
  }
  if (adam != nullptr && adam->initialized()) {
    if (adam->m.size() != params.size())
      throw std::runtime_error(
          "snapshot: optimizer state tracks a different parameter list");
    cp.has_adam = true;
    cp.adam_t = adam->t;
    cp.adam_m = adam->m;
    cp.adam_v = adam->v;
  }
  return cp;
}

inline std::string serialize_checkpoint(const Checkpoint& cp) {
  std::string out;
  out += "ORNT";
  io::put_u32(out, cp.version);
  io::put_u64(out, cp.model_hash);
  io::put_u64(out, cp.model_text.size());
  out += cp.model_text;
  io::put_u64(out, cp.epoch);
  io::put_u64(out, cp.step);
  io::put_u64(out, cp.rng_state.size());
  out += cp.rng_state;
  io::put_u32(out, static_cast<std::uint32_t>(cp.names.size()));
  for (size_t i = 0; i < cp.names.size(); ++i) {
    io::put_u64(out, cp.names[i].size());
    out += cp.names[i];
    io::put_u32(out, static_cast<std::uint32_t>(cp.shapes[i].size()));
    for (int d : cp.shapes[i]) io::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : cp.values[i]) io::put_f64(out, v);
  }
  out.push_back(cp.has_adam ? '\1' : '\0');
  if (cp.has_adam) {
    io::put_u64(out, static_cast<std::uint64_t>(cp.adam_t));
    for (size_t i = 0; i < cp.names.size(); ++i) {
      for (double v : cp.adam_m[i]) io::put_f64(out, v);
      for (double v : cp.adam_v[i]) io::put_f64(out, v);
    }
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& buf) {
  auto corrupt = [](const std::string& why) -> std::runtime_error {
    return std::runtime_error("checkpoint: " + why);
  };
  io::Reader r(buf.data(), buf.size());
  try {
    if (r.bytes(4) != "ORNT") throw corrupt("bad magic (not an ORNT file)");
    Checkpoint cp;
    cp.version = r.u32();
    if (cp.version != 1)
      throw corrupt("unsupported format version " +
                    std::to_string(cp.version));
    cp.model_hash = r.u64();
    cp.model_text = r.bytes(r.u64());
    if (fnv1a64(cp.model_text) != cp.model_hash)
      throw corrupt("model config hash does not match stored text (corrupt)");
    cp.epoch = r.u64();
    cp.step = r.u64();
    cp.rng_state = r.bytes(r.u64());
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      cp.names.push_back(r.bytes(r.u64()));
      const std::uint32_t nd = r.u32();
      std::vector<int> shape(nd);
      std::int64_t numel = 1;
      for (std::uint32_t d = 0; d < nd; ++d) {
        shape[d] = static_cast<int>(r.u32());
        if (shape[d] <= 0) throw corrupt("non-positive dimension");
        numel *= shape[d];
      }
      if (numel > (1ll << 32)) throw corrupt("implausible parameter size");
      cp.shapes.push_back(std::move(shape));
      std::vector<double> vals(static_cast<size_t>(numel));
      r.f64_array(vals.data(), vals.size());
      cp.values.push_back(std::move(vals));
    }
    const std::string flag = r.bytes(1);
    cp.has_adam = flag[0] != '\0';
    if (cp.has_adam) {
      cp.adam_t = static_cast<std::int64_t>(r.u64());
      for (std::uint32_t i = 0; i < n; ++i) {
        const size_t numel = cp.values[i].size();
        std::vector<double> m(numel), v(numel);
        r.f64_array(m.data(), numel);
        r.f64_array(v.data(), numel);
        cp.adam_m.push_back(std::move(m));
        cp.adam_v.push_back(std::move(v));
      }
    }
    if (r.remaining() != 0)
      throw corrupt(std::to_string(r.remaining()) + " trailing bytes");
    return cp;
  } catch (const std::runtime_error&) {
    throw;
  }
}

inline void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  const std::string buf = serialize_checkpoint(cp);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw std::runtime_error("short write for checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(buf);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

// Restores parameters (and optionally optimizer moments and the RNG stream)
// into an existing model. The checkpoint must have been written by a model
// with the same canonical config — a hash mismatch is a user-facing
// incompatibility, reported as a configuration error.
inline void restore_into(const Checkpoint& cp, OrNet& model,
                         AdamState* adam = nullptr, Rng* rng = nullptr) {
  const std::uint64_t want = model_config_hash(model.config());
  if (cp.model_hash != want)
    throw ConfigError(
        "checkpoint is incompatible with the requested model config "
        "(config hash " + std::to_string(want) + ", checkpoint hash " +
        std::to_string(cp.model_hash) + ")");
  auto params = model.named_params();
  if (params.size() != cp.names.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params[i];
    if (name != cp.names[i])
      throw std::runtime_error("checkpoint: parameter order mismatch at '" +
                               cp.names[i] + "' (expected '" + name + "')");
    if (p.shape() != cp.shapes[i])
      throw std::runtime_error("checkpoint: shape mismatch for '" + name +
                               "'");
    p.mutable_values() = cp.values[i];
  }
  if (adam != nullptr) {
    if (cp.has_adam) {
      adam->m = cp.adam_m;
      adam->v = cp.adam_v;
      adam->t = cp.adam_t;
    } else {
      *adam = AdamState{};
    }
  }
  if (rng != nullptr && !cp.rng_state.empty())
    *rng = Rng::deserialize(cp.rng_state);
}

// Builds a model directly from a checkpoint (eval path: no config file
// needed). Init draws use a throwaway stream; every value is overwritten.
inline OrNet model_from_checkpoint(const Checkpoint& cp) {
  const ModelConfig mc = model_config_from_text(cp.model_text);
  Rng scratch(0);
  OrNet model(mc, scratch);
  restore_into(cp, model);
  return model;
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

struct EpochStats {
  int epoch = 0;        // 1-based completed-epoch label
  double mean_l1 = 0.0; // mean train loss over the epoch's steps
  bool validated = false;
  double val_psnr = 0.0;
  double val_ssim = 0.0;
};

struct TrainResult {
  std::int64_t steps_run = 0;    // optimizer steps executed by this call
  std::int64_t total_steps = 0;  // global step counter after this call
  double initial_l1 = 0.0;       // first step's loss in this call
  double final_step_l1 = 0.0;    // last step's loss
  double final_epoch_l1 = 0.0;   // mean loss over the last epoch
  std::vector<double> step_l1;   // per-step losses, in order
  std::vector<EpochStats> epochs;
  std::vector<std::string> checkpoint_paths;
  std::string last_checkpoint_path;
  std::string metrics_path;
};

namespace detail {

// Upfront feasibility checks so a bad run dies with a config error rather
// than a mid-epoch shape error.
inline void check_train_feasibility(const RunConfig& rc,
                                    const std::vector<PatchPair>& data,
                                    size_t n_train) {
  const int div = rc.model.divisibility();
  const int min_side = 3 * div;  // coarsest branch still needs a 3x3 support
  if (rc.train.aug_crop) {
    if (rc.train.crop % rc.model.scale != 0)
      throw ConfigError("crop " + std::to_string(rc.train.crop) +
                        " is not a multiple of scale " +
                        std::to_string(rc.model.scale));
    if (rc.train.crop % div != 0)
      throw ConfigError("crop " + std::to_string(rc.train.crop) +
                        " is not a multiple of the model's required "
                        "divisibility " + std::to_string(div));
    if (rc.train.crop < min_side)
      throw ConfigError("crop " + std::to_string(rc.train.crop) +
                        " is too small for branch_count " +
                        std::to_string(rc.model.branch_count) +
                        " (needs at least " + std::to_string(min_side) + ")");
  }
  for (size_t i = 0; i < data.size(); ++i) {
    const PatchPair& p = data[i];
    validate_pair(p);
    if (p.scale != rc.model.scale)
      throw ConfigError("dataset pair " + std::to_string(i) + " has scale " +
                        std::to_string(p.scale) + " but the model expects " +
                        std::to_string(rc.model.scale));
    const bool cropped = rc.train.aug_crop && i < n_train;
    const int h = p.hr.dim(1), w = p.hr.dim(2);
    if (cropped) {
      if (h < rc.train.crop || w < rc.train.crop)
        throw ConfigError("dataset pair " + std::to_string(i) + " (" +
                          std::to_string(h) + "x" + std::to_string(w) +
                          ") is smaller than crop " +
                          std::to_string(rc.train.crop));
    } else {
      // Used at native size: must satisfy the model's input contract.
      if (h % div != 0 || w % div != 0)
        throw ConfigError("dataset pair " + std::to_string(i) + " (" +
                          std::to_string(h) + "x" + std::to_string(w) +
                          ") is not divisible by " + std::to_string(div) +
                          " as branch_count " +
                          std::to_string(rc.model.branch_count) +
                          " requires");
      if (h < min_side || w < min_side)
        throw ConfigError("dataset pair " + std::to_string(i) +
                          " is too small for the model (needs " +
                          std::to_string(min_side) + ")");
    }
  }
}

inline std::string csv_num(double v) { return format_double(v); }

}  // namespace detail

// Runs training per the RunConfig over an already-ingested dataset.
//
// Split: the last `val_count` pairs are the validation set; the rest train.
// val_count = 0 validates on the training set itself (overfit runs).
// Checkpoints land in out_dir as ckpt_epoch_<n>.ornt every checkpoint_every
// epochs (the final epoch always gets one); metrics stream to
// out_dir/metrics.csv with columns step,epoch,lr,l1,psnr,ssim — per-step
// rows leave psnr/ssim empty, per-epoch rows fill them when validation ran.
//
// `resume_path` continues a previous run bitwise: parameters, optimizer
// moments, RNG stream, and the epoch/step counters all restore, and the
// metrics CSV is appended rather than truncated.
inline TrainResult train_loop(const RunConfig& rc,
                              const std::vector<PatchPair>& data,
                              const std::string& resume_path = "") {
  rc.model.validate();
  rc.train.validate();
  if (data.empty()) throw ConfigError("training requires a non-empty dataset");
  if (rc.val_count < 0) throw ConfigError("val_count must be >= 0");
  if (static_cast<size_t>(rc.val_count) >= data.size())
    throw ConfigError("val_count " + std::to_string(rc.val_count) +
                      " leaves no training data (dataset has " +
                      std::to_string(data.size()) + " pairs)");

  const size_t n_train = data.size() - static_cast<size_t>(rc.val_count);
  detail::check_train_feasibility(rc, data, n_train);

  // Validation views: last-k, or the whole training set when val_count = 0.
  std::vector<size_t> val_idx;
  if (rc.val_count > 0)
    for (size_t i = n_train; i < data.size(); ++i) val_idx.push_back(i);
  else
    for (size_t i = 0; i < n_train; ++i) val_idx.push_back(i);

  // One stream for everything, in construction order.
  Rng rng(rc.train.seed);
  OrNet model(rc.model, rng);
  AdamState adam;
  std::uint64_t epoch0 = 0, global_step = 0;
  if (!resume_path.empty()) {
    const Checkpoint cp = load_checkpoint(resume_path);
    restore_into(cp, model, &adam, &rng);
    epoch0 = cp.epoch;
    global_step = cp.step;
  }

  std::filesystem::create_directories(rc.out_dir);
  const std::string metrics_path = rc.out_dir + "/metrics.csv";
  const bool append = !resume_path.empty() &&
                      std::filesystem::exists(metrics_path);
  std::ofstream csv(metrics_path,
                    append ? std::ios::app : std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + metrics_path);
  if (!append) csv << "step,epoch,lr,l1,psnr,ssim\n" << std::flush;

  const AugmentOptions aug = AugmentOptions::from(rc.train);
  const AdamConfig acfg{rc.train.beta1, rc.train.beta2, rc.train.eps};
  auto params = model.named_params();

  TrainResult res;
  res.total_steps = static_cast<std::int64_t>(global_step);
  res.metrics_path = metrics_path;

  for (int e = static_cast<int>(epoch0); e < rc.train.max_epochs; ++e) {
    const double lr = lr_at_epoch(rc.train.lr0, rc.train.lr_decay, e);

    std::vector<size_t> order(n_train);
    for (size_t i = 0; i < n_train; ++i) order[i] = i;
    rng.shuffle(order);

    double epoch_loss_sum = 0.0;
    int epoch_steps = 0;
    const size_t bs = static_cast<size_t>(rc.train.batch_size);
    for (size_t start = 0; start < n_train; start += bs) {
      const size_t stop = std::min(start + bs, n_train);
      std::vector<Tensor> xs, ys;
      for (size_t i = start; i < stop; ++i) {
        const PatchPair ap = augment(data[order[i]], aug, rng);
        // Pre-upsample design: the network runs at HR size.
        xs.push_back(bicubic_resize(ap.lr, ap.hr.dim(1), ap.hr.dim(2)));
        ys.push_back(ap.hr);
      }
      const Tensor x = stack_batch(xs);
      const Tensor y = stack_batch(ys);

      const Tensor sr = model.forward(x);
      const Tensor loss = l1_loss(sr, y);
      const double l = loss.scalar();
      ++global_step;
      if (!std::isfinite(l))
        throw std::runtime_error(
            "training aborted: non-finite loss " + std::to_string(l) +
            " at step " + std::to_string(global_step) + " (epoch " +
            std::to_string(e + 1) + "); lower lr0 or inspect the data");
      backward(loss);
      adam_step(params, adam, lr, acfg);
      model.zero_grads();

      epoch_loss_sum += l;
      ++epoch_steps;
      res.step_l1.push_back(l);
      if (res.steps_run == 0) res.initial_l1 = l;
      ++res.steps_run;
      res.final_step_l1 = l;

      csv << global_step << "," << (e + 1) << "," << detail::csv_num(lr)
          << "," << detail::csv_num(l) << ",,\n"
          << std::flush;
    }

    EpochStats es;
    es.epoch = e + 1;
    es.mean_l1 = epoch_steps > 0 ? epoch_loss_sum / epoch_steps : 0.0;
    res.final_epoch_l1 = es.mean_l1;

    const bool last_epoch = e + 1 == rc.train.max_epochs;
    if ((e + 1) % rc.train.val_every == 0 || last_epoch) {
      NoGradGuard ng;
      double psnr_sum = 0.0, ssim_sum = 0.0;
      for (size_t vi : val_idx) {
        const PatchPair& p = data[vi];
        const Tensor x = stack_batch(
            {bicubic_resize(p.lr, p.hr.dim(1), p.hr.dim(2))});
        const Tensor sr = detail::squeeze_batch1(model.forward(x));
        psnr_sum += psnr(sr, p.hr);
        ssim_sum += ssim(sr, p.hr);
      }
      es.validated = true;
      es.val_psnr = psnr_sum / static_cast<double>(val_idx.size());
      es.val_ssim = ssim_sum / static_cast<double>(val_idx.size());
    }

    csv << global_step << "," << (e + 1) << "," << detail::csv_num(lr) << ","
        << detail::csv_num(es.mean_l1) << ",";
    if (es.validated)
      csv << detail::csv_num(es.val_psnr) << ","
          << detail::csv_num(es.val_ssim);
    else
      csv << ",";
    csv << "\n" << std::flush;
    res.epochs.push_back(es);

    if ((e + 1) % rc.train.checkpoint_every == 0 || last_epoch) {
      const Checkpoint cp = snapshot(model, &adam,
                                     static_cast<std::uint64_t>(e + 1),
                                     global_step, rng);
      const std::string path =
          rc.out_dir + "/ckpt_epoch_" + std::to_string(e + 1) + ".ornt";
      save_checkpoint(cp, path);
      res.checkpoint_paths.push_back(path);
      res.last_checkpoint_path = path;
    }
  }

  res.total_steps = static_cast<std::int64_t>(global_step);
  return res;
}

}  // namespace ornet
