// Tests for the training module: geometry transforms, paired augmentation,
// checkpoint serialization, and the training loop's determinism contracts.
//
// Geometry oracles are index arithmetic written out by hand. The alignment
// oracle exploits nearest-neighbour structure: if hr(y,x) = lr(y/2,x/2)
// before augmentation, every aligned crop/flip/rotation preserves that
// identity — so one check covers the whole transform family.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "ornet/train.hpp"

using namespace ornet;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.scale = 2;
  cfg.branch_count = 2;  // divisibility 2: 16x16 patches work uncropped
  cfg.stem_channels = 4;
  cfg.branch_channels = {6, 4};
  cfg.feu_counts = {1, 1};
  cfg.feu_stages = 1;
  cfg.ca_reduction = 2;
  cfg.basis_kernels = 2;
  cfg.rfa_kernel = 3;
  cfg.head_channels = 4;
  return cfg;
}

// n degraded pairs from deterministic synthetic scenes.
std::vector<PatchPair> make_pairs(int n, int side, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PatchPair> out;
  for (int i = 0; i < n; ++i) {
    const Tensor hr = synthetic_scene(side, side, rng);
    out.push_back(synthesize_degradation(hr, "bicubic", 2, rng,
                                         "scene" + std::to_string(i)));
  }
  return out;
}

// A pair whose HR is the nearest-neighbour x2 upscale of its LR: the
// alignment oracle for augment().
PatchPair nn_pair(int lr_side, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor lr = synthetic_scene(lr_side, lr_side, rng);
  std::vector<double> up(static_cast<size_t>(3) * lr_side * 2 * lr_side * 2);
  const auto& lv = lr.values();
  size_t o = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < lr_side * 2; ++y)
      for (int x = 0; x < lr_side * 2; ++x)
        up[o++] = lv[(static_cast<size_t>(c) * lr_side + y / 2) * lr_side +
                     x / 2];
  PatchPair p;
  p.lr = lr;
  p.hr = Tensor::from_data({3, lr_side * 2, lr_side * 2}, std::move(up));
  p.scale = 2;
  p.source_id = "nn";
  p.tag = "real";
  return p;
}

bool is_nn_aligned(const PatchPair& p) {
  const auto& lv = p.lr.values();
  const auto& hv = p.hr.values();
  const int lh = p.lr.dim(1), lw = p.lr.dim(2);
  const int hh = p.hr.dim(1), hw = p.hr.dim(2);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < hh; ++y)
      for (int x = 0; x < hw; ++x)
        if (hv[(static_cast<size_t>(c) * hh + y) * hw + x] !=
            lv[(static_cast<size_t>(c) * lh + y / 2) * lw + x / 2])
          return false;
  return true;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::vector<std::string> file_lines(const std::string& path) {
  std::istringstream is(read_file(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) out.push_back(line);
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ornet_train_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

// ---------------------------------------------------------------------------
// Geometry transforms.
// ---------------------------------------------------------------------------

TEST_CASE("crop_chw extracts the exact window", "[train]") {
  // 1x4x5 ramp, v(y,x) = 10y + x.
  std::vector<double> v;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) v.push_back(10.0 * y + x);
  const Tensor t = Tensor::from_data({1, 4, 5}, v);

  const Tensor c = crop_chw(t, 1, 2, 2, 3);
  REQUIRE(c.shape() == std::vector<int>{1, 2, 3});
  REQUIRE(c.values() == std::vector<double>{12, 13, 14, 22, 23, 24});

  REQUIRE_THROWS_MATCHES(crop_chw(t, 3, 0, 2, 2), std::invalid_argument,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("exceeds input")));
  REQUIRE_THROWS_AS(crop_chw(t, 0, 0, 0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(crop_chw(Tensor::zeros({1, 2, 3, 4}), 0, 0, 1, 1),
                    std::invalid_argument);
}

TEST_CASE("flips and rotations follow the pinned index maps", "[train]") {
  // 2 channels x 2x3; channel 1 = channel 0 + 100 so channel independence
  // shows up in the expected vectors.
  const Tensor t = Tensor::from_data(
      {2, 2, 3}, {0, 1, 2, 10, 11, 12, 100, 101, 102, 110, 111, 112});

  // hflip: out(y,x) = in(y, W-1-x)
  REQUIRE(hflip_chw(t).values() ==
          std::vector<double>{2, 1, 0, 12, 11, 10, 102, 101, 100, 112, 111,
                              110});
  // vflip: out(y,x) = in(H-1-y, x)
  REQUIRE(vflip_chw(t).values() ==
          std::vector<double>{10, 11, 12, 0, 1, 2, 110, 111, 112, 100, 101,
                              102});
  // rot90 cw: out(y,x) = in(H-1-x, y); (2,2,3) -> (2,3,2)
  const Tensor r = rot90_chw(t, 1);
  REQUIRE(r.shape() == std::vector<int>{2, 3, 2});
  REQUIRE(r.values() ==
          std::vector<double>{10, 0, 11, 1, 12, 2, 110, 100, 111, 101, 112,
                              102});

  // Group identities.
  REQUIRE(rot90_chw(t, 4).values() == t.values());
  REQUIRE(rot90_chw(t, -1).values() == rot90_chw(t, 3).values());
  REQUIRE(rot90_chw(rot90_chw(t, 2), 2).values() == t.values());
  REQUIRE(hflip_chw(hflip_chw(t)).values() == t.values());
  REQUIRE(vflip_chw(vflip_chw(t)).values() == t.values());
  // 180 degrees = hflip then vflip.
  REQUIRE(rot90_chw(t, 2).values() == vflip_chw(hflip_chw(t)).values());
}

// ---------------------------------------------------------------------------
// Augmentation.
// ---------------------------------------------------------------------------

TEST_CASE("augment with all stages off is the identity and draws nothing",
          "[train]") {
  const PatchPair p = nn_pair(8, 1);
  Rng rng(7);
  const std::string before = rng.serialize();
  const PatchPair a = augment(p, {false, false, false, 0}, rng);
  REQUIRE(rng.serialize() == before);
  REQUIRE(a.lr.values() == p.lr.values());
  REQUIRE(a.hr.values() == p.hr.values());
  REQUIRE(a.scale == 2);
  REQUIRE(a.source_id == "nn");
}

TEST_CASE("augment keeps LR and HR aligned under every transform",
          "[train]") {
  const PatchPair p = nn_pair(10, 2);  // 20x20 HR
  REQUIRE(is_nn_aligned(p));
  AugmentOptions all{true, true, true, 12};
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const PatchPair a = augment(p, all, rng);
    CAPTURE(seed);
    REQUIRE(a.hr.dim(1) == 12);
    REQUIRE(a.hr.dim(2) == 12);
    REQUIRE(a.lr.dim(1) == 6);
    REQUIRE(a.lr.dim(2) == 6);
    validate_pair(a);
    REQUIRE(is_nn_aligned(a));
  }
}

TEST_CASE("augment draw order is crop y, crop x, flip, rotation", "[train]") {
  const PatchPair p = nn_pair(10, 3);
  AugmentOptions all{true, true, true, 12};
  Rng rng(11);
  Rng replay(11);
  (void)augment(p, all, rng);
  const int cl = 12 / 2;
  (void)replay.uniform_int(p.lr.dim(1) - cl + 1);
  (void)replay.uniform_int(p.lr.dim(2) - cl + 1);
  (void)replay.uniform_int(3);
  (void)replay.uniform_int(4);
  REQUIRE(rng.serialize() == replay.serialize());

  // Disabled stages draw nothing: flip+rotate only consumes two values.
  Rng rng2(11);
  Rng replay2(11);
  (void)augment(p, {true, true, false, 0}, rng2);
  (void)replay2.uniform_int(3);
  (void)replay2.uniform_int(4);
  REQUIRE(rng2.serialize() == replay2.serialize());
}

TEST_CASE("augment rejects infeasible crops", "[train]") {
  const PatchPair p = nn_pair(8, 4);  // 16x16 HR
  Rng rng(0);
  REQUIRE_THROWS_MATCHES(augment(p, {false, false, true, 18}, rng),
                         std::invalid_argument,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("larger than image")));
  REQUIRE_THROWS_MATCHES(augment(p, {false, false, true, 9}, rng),
                         std::invalid_argument,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("multiple of scale")));
}

TEST_CASE("stack_batch concatenates along a new batch axis", "[train]") {
  const Tensor a = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from_data({1, 2, 2}, {5, 6, 7, 8});
  const Tensor s = stack_batch({a, b});
  REQUIRE(s.shape() == std::vector<int>{2, 1, 2, 2});
  REQUIRE(s.values() == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});

  REQUIRE_THROWS_MATCHES(
      stack_batch({a, Tensor::zeros({1, 2, 3})}), std::invalid_argument,
      Catch::Matchers::MessageMatches(ContainsSubstring("uniform-size")));
  REQUIRE_THROWS_AS(stack_batch({}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Checkpoints.
// ---------------------------------------------------------------------------

TEST_CASE("checkpoint serialization round-trips bitwise", "[train][ckpt]") {
  Rng rng(5);
  OrNet model(tiny_model(), rng);
  auto params = model.named_params();

  AdamState adam;
  adam.init(params);
  adam.t = 12;
  for (auto& mv : adam.m)
    for (double& x : mv) x = 0.25;
  for (auto& vv : adam.v)
    for (double& x : vv) x = 1.5;

  const Checkpoint cp = snapshot(model, &adam, 3, 42, rng);
  const std::string bytes = serialize_checkpoint(cp);
  REQUIRE(bytes.substr(0, 4) == "ORNT");

  const Checkpoint back = deserialize_checkpoint(bytes);
  REQUIRE(back.version == 1);
  REQUIRE(back.model_hash == model_config_hash(model.config()));
  REQUIRE(back.model_text == canonical_model_text(model.config()));
  REQUIRE(back.epoch == 3);
  REQUIRE(back.step == 42);
  REQUIRE(back.rng_state == rng.serialize());
  REQUIRE(back.names == cp.names);
  REQUIRE(back.shapes == cp.shapes);
  REQUIRE(back.values == cp.values);
  REQUIRE(back.has_adam);
  REQUIRE(back.adam_t == 12);
  REQUIRE(back.adam_m == cp.adam_m);
  REQUIRE(back.adam_v == cp.adam_v);

  // Serialize(deserialize(x)) == x, byte for byte.
  REQUIRE(serialize_checkpoint(back) == bytes);

  // Weights-only snapshot drops the optimizer block.
  const Checkpoint lean = snapshot(model, nullptr, 0, 0, rng);
  const Checkpoint lean_back =
      deserialize_checkpoint(serialize_checkpoint(lean));
  REQUIRE_FALSE(lean_back.has_adam);
}

TEST_CASE("checkpoint restore reproduces forward passes bitwise",
          "[train][ckpt]") {
  Rng rng(6);
  OrNet model(tiny_model(), rng);
  Rng data_rng(7);
  const Tensor x = Tensor::randn({1, 3, 12, 12}, data_rng, 0.3);
  const std::vector<double> want = model.forward(x).values();

  const Checkpoint cp = snapshot(model, nullptr, 0, 0, rng);

  // Restore into a differently-initialized model of the same config.
  Rng other(999);
  OrNet target(tiny_model(), other);
  REQUIRE(target.forward(x).values() != want);
  restore_into(cp, target);
  REQUIRE(target.forward(x).values() == want);

  // Or rebuild the model from the checkpoint alone.
  OrNet rebuilt = model_from_checkpoint(cp);
  REQUIRE(rebuilt.forward(x).values() == want);
  REQUIRE(canonical_model_text(rebuilt.config()) ==
          canonical_model_text(model.config()));
}

TEST_CASE("checkpoint loader rejects damage and incompatibility",
          "[train][ckpt]") {
  Rng rng(8);
  OrNet model(tiny_model(), rng);
  const std::string good = serialize_checkpoint(
      snapshot(model, nullptr, 1, 2, rng));

  auto expect_error = [](std::string bytes, const std::string& what) {
    REQUIRE_THROWS_MATCHES(deserialize_checkpoint(bytes), std::runtime_error,
                           Catch::Matchers::MessageMatches(
                               ContainsSubstring(what)));
  };

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  expect_error(bad_magic, "bad magic");

  std::string bad_version = good;
  bad_version[4] = 2;  // little-endian u32 at offset 4
  expect_error(bad_version, "unsupported format version");

  // Model text starts at offset 24; flipping a byte breaks the stored hash.
  std::string bitflip = good;
  bitflip[25] ^= 0x20;
  expect_error(bitflip, "does not match stored text");

  expect_error(good.substr(0, good.size() / 2), "past end");
  expect_error(good + "x", "trailing");

  // Valid file, wrong target architecture: a configuration error.
  ModelConfig narrower = tiny_model();
  narrower.stem_channels = 5;
  Rng r2(9);
  OrNet other(narrower, r2);
  const Checkpoint cp = deserialize_checkpoint(good);
  REQUIRE_THROWS_MATCHES(restore_into(cp, other), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("incompatible")));

  REQUIRE_THROWS_MATCHES(load_checkpoint("/nonexistent/x.ornt"),
                         std::runtime_error,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("/nonexistent/x.ornt")));
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

namespace {

RunConfig train_rc(const fs::path& out, int epochs, std::uint64_t seed) {
  RunConfig rc;
  rc.model = tiny_model();
  rc.train.lr0 = 1e-3;
  rc.train.lr_decay = 0.5;
  rc.train.batch_size = 2;
  rc.train.max_epochs = epochs;
  rc.train.seed = seed;
  rc.train.aug_flip = true;
  rc.train.aug_rotate = true;
  rc.train.aug_crop = true;
  rc.train.crop = 12;
  rc.val_count = 1;
  rc.out_dir = out.string();
  return rc;
}

}  // namespace

TEST_CASE("train_loop runs, logs and checkpoints per contract", "[train]") {
  const fs::path out = fresh_dir("basic");
  const auto data = make_pairs(4, 16, 21);  // 3 train + 1 val
  const RunConfig rc = train_rc(out, 3, 5);

  const TrainResult res = train_loop(rc, data);

  // 3 train pairs / batch 2 -> 2 steps per epoch, 3 epochs.
  REQUIRE(res.steps_run == 6);
  REQUIRE(res.total_steps == 6);
  REQUIRE(res.step_l1.size() == 6);
  REQUIRE(res.initial_l1 == res.step_l1.front());
  REQUIRE(res.final_step_l1 == res.step_l1.back());
  REQUIRE(res.epochs.size() == 3);
  for (const auto& es : res.epochs) {
    REQUIRE(es.validated);  // val_every = 1
    REQUIRE(es.val_psnr > 0.0);
    REQUIRE(es.val_ssim > 0.0);
    REQUIRE(es.val_ssim <= 1.0);
  }

  // Checkpoint per epoch.
  REQUIRE(res.checkpoint_paths.size() == 3);
  for (int e = 1; e <= 3; ++e)
    REQUIRE(fs::exists(out / ("ckpt_epoch_" + std::to_string(e) + ".ornt")));
  const Checkpoint last = load_checkpoint(res.last_checkpoint_path);
  REQUIRE(last.epoch == 3);
  REQUIRE(last.step == 6);
  REQUIRE(last.has_adam);
  REQUIRE(last.adam_t == 6);

  // Metrics CSV: header + 6 step rows + 3 epoch rows.
  const auto lines = file_lines(res.metrics_path);
  REQUIRE(lines.size() == 1 + 6 + 3);
  REQUIRE(lines[0] == "step,epoch,lr,l1,psnr,ssim");
  // Step rows leave psnr/ssim empty.
  REQUIRE(lines[1].substr(lines[1].size() - 2) == ",,");
  REQUIRE(lines[1].substr(0, 4) == "1,1,");
  // First epoch row is after epoch 1's two steps; lr of epoch 1 is lr0.
  REQUIRE(lines[3].substr(0, 4) == "2,1,");
  REQUIRE_THAT(lines[3], ContainsSubstring("0.001"));
  // Epoch rows carry both metrics (six fields, none empty).
  std::istringstream es(lines[3]);
  std::string field;
  int fields = 0;
  while (std::getline(es, field, ',')) {
    REQUIRE_FALSE(field.empty());
    ++fields;
  }
  REQUIRE(fields == 6);
  // lr halves per epoch: epoch 2's rows carry 0.0005.
  REQUIRE_THAT(lines[4], ContainsSubstring("0.0005"));
}

TEST_CASE("train_loop is bitwise deterministic in seed", "[train]") {
  const auto data = make_pairs(3, 16, 22);
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b"),
                 c = fresh_dir("det_c");

  const TrainResult ra = train_loop(train_rc(a, 2, 9), data);
  const TrainResult rb = train_loop(train_rc(b, 2, 9), data);
  const TrainResult rc2 = train_loop(train_rc(c, 2, 10), data);

  REQUIRE(ra.step_l1 == rb.step_l1);
  REQUIRE(read_file(ra.metrics_path) == read_file(rb.metrics_path));
  REQUIRE(read_file(ra.last_checkpoint_path) ==
          read_file(rb.last_checkpoint_path));

  // A different seed gives a different trajectory.
  REQUIRE(ra.step_l1 != rc2.step_l1);
}

TEST_CASE("resume reproduces the uninterrupted run bitwise", "[train]") {
  const auto data = make_pairs(4, 16, 23);
  const fs::path a = fresh_dir("straight"), b = fresh_dir("resumed");

  const TrainResult full = train_loop(train_rc(a, 3, 13), data);

  const TrainResult part = train_loop(train_rc(b, 2, 13), data);
  REQUIRE(part.last_checkpoint_path == (b / "ckpt_epoch_2.ornt").string());
  const TrainResult rest =
      train_loop(train_rc(b, 3, 13), data, part.last_checkpoint_path);

  REQUIRE(rest.steps_run == 2);   // one more epoch of 2 steps
  REQUIRE(rest.total_steps == 6);
  REQUIRE(read_file(a / "ckpt_epoch_3.ornt") ==
          read_file(b / "ckpt_epoch_3.ornt"));
  REQUIRE(read_file(full.metrics_path) == read_file(rest.metrics_path));
}

TEST_CASE("train_loop honours checkpoint_every and val_every", "[train]") {
  const fs::path out = fresh_dir("throttle");
  const auto data = make_pairs(3, 16, 24);
  RunConfig rc = train_rc(out, 5, 3);
  rc.train.checkpoint_every = 2;
  rc.train.val_every = 3;

  const TrainResult res = train_loop(rc, data);

  // Epochs 2, 4 hit the interval; epoch 5 is final and always written.
  REQUIRE(res.checkpoint_paths.size() == 3);
  REQUIRE(fs::exists(out / "ckpt_epoch_2.ornt"));
  REQUIRE(fs::exists(out / "ckpt_epoch_4.ornt"));
  REQUIRE(fs::exists(out / "ckpt_epoch_5.ornt"));
  REQUIRE_FALSE(fs::exists(out / "ckpt_epoch_1.ornt"));
  REQUIRE_FALSE(fs::exists(out / "ckpt_epoch_3.ornt"));

  // Validation at epoch 3 and on the final epoch.
  REQUIRE(res.epochs.size() == 5);
  REQUIRE_FALSE(res.epochs[0].validated);
  REQUIRE_FALSE(res.epochs[1].validated);
  REQUIRE(res.epochs[2].validated);
  REQUIRE_FALSE(res.epochs[3].validated);
  REQUIRE(res.epochs[4].validated);
}

TEST_CASE("train_loop rejects infeasible configurations", "[train]") {
  const fs::path out = fresh_dir("reject");
  const auto data = make_pairs(2, 16, 25);

  REQUIRE_THROWS_MATCHES(train_loop(train_rc(out, 1, 0), {}), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("non-empty")));

  RunConfig rc = train_rc(out, 1, 0);
  rc.val_count = 2;  // leaves nothing to train on
  REQUIRE_THROWS_MATCHES(train_loop(rc, data), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("leaves no training data")));

  rc = train_rc(out, 1, 0);
  rc.model.scale = 3;  // dataset pairs are x2
  rc.train.crop = 12;  // multiple of 3 and of divisibility
  REQUIRE_THROWS_MATCHES(train_loop(rc, data), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("scale")));

  // A crop that is a multiple of the scale but not of the model's required
  // divisibility (branch_count 3 -> 4).
  rc = train_rc(out, 1, 0);
  rc.train.crop = 14;
  rc.model.branch_count = 3;
  rc.model.branch_channels = {6, 6, 4};
  rc.model.feu_counts = {1, 1, 1};
  REQUIRE_THROWS_MATCHES(train_loop(rc, data), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("divisibility")));

  rc = train_rc(out, 1, 0);
  rc.train.crop = 18;  // larger than the 16x16 patches
  REQUIRE_THROWS_MATCHES(train_loop(rc, data), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("smaller than crop")));

  // Uncropped pairs run at native size and must meet the model's minimum
  // side (3 * divisibility = 6); a 4x4 HR pair trips it.
  rc = train_rc(out, 1, 0);
  rc.train.aug_crop = false;
  auto small = data;
  {
    Rng r(1);
    const Tensor hr = synthetic_scene(8, 8, r);
    small.push_back(synthesize_degradation(hr, "bicubic", 2, r, "small"));
    small.back().hr = crop_chw(small.back().hr, 0, 0, 4, 4);
    small.back().lr = crop_chw(small.back().lr, 0, 0, 2, 2);
  }
  rc.val_count = 0;
  REQUIRE_THROWS_MATCHES(train_loop(rc, small), ConfigError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("too small")));
}

TEST_CASE("train_loop aborts on a non-finite loss with a diagnostic",
          "[train]") {
  const fs::path out = fresh_dir("nanloss");
  // An HR target near the double limit: the L1 accumulation overflows to
  // infinity while the forward pass itself stays finite.
  PatchPair p;
  p.lr = Tensor::full({3, 8, 8}, 0.5);
  p.hr = Tensor::full({3, 16, 16}, 1e308);
  p.scale = 2;
  p.source_id = "overflow";
  p.tag = "real";

  RunConfig rc = train_rc(out, 1, 0);
  rc.train.aug_crop = false;
  rc.train.aug_flip = false;
  rc.train.aug_rotate = false;
  rc.train.batch_size = 1;
  rc.val_count = 0;
  REQUIRE_THROWS_MATCHES(train_loop(rc, {p}), std::runtime_error,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("non-finite loss") &&
                             ContainsSubstring("step 1")));
}

TEST_CASE("short overfit run reduces the loss", "[train]") {
  const fs::path out = fresh_dir("overfit_lite");
  const auto data = make_pairs(1, 16, 26);
  RunConfig rc = train_rc(out, 40, 1);
  rc.train.batch_size = 1;
  rc.train.lr_decay = 1.0;  // constant lr for a pure optimization smoke test
  rc.train.aug_flip = false;
  rc.train.aug_rotate = false;
  rc.train.aug_crop = false;
  rc.val_count = 0;
  rc.train.checkpoint_every = 40;
  rc.train.val_every = 40;

  const TrainResult res = train_loop(rc, data);
  REQUIRE(res.steps_run == 40);
  REQUIRE(res.final_epoch_l1 < res.initial_l1);
  // The last quarter of the run should also beat the first quarter on
  // average — direction, not magnitude.
  const auto& l = res.step_l1;
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 10; ++i) {
    head += l[static_cast<size_t>(i)];
    tail += l[l.size() - 10 + static_cast<size_t>(i)];
  }
  REQUIRE(tail < head);
}
