// Tests for the ablation harness: row enumeration and order, verbatim
// reference numbers, CSV shape, and the degenerate equivalence between the
// plain-spatial-attention variant and a one-kernel dynamic pool.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "ornet/ablate.hpp"

using namespace ornet;
namespace fs = std::filesystem;

namespace {

RunConfig ablate_base(const std::string& out) {
  RunConfig rc;
  rc.model.scale = 2;
  rc.model.branch_count = 3;
  rc.model.stem_channels = 4;
  rc.model.branch_channels = {8, 6, 4};
  rc.model.feu_counts = {1, 1, 1};
  rc.model.feu_stages = 1;
  rc.model.ca_reduction = 2;
  rc.model.basis_kernels = 2;
  rc.model.head_channels = 4;
  rc.train.lr0 = 1e-3;
  rc.train.lr_decay = 1.0;
  rc.train.batch_size = 8;
  rc.train.max_epochs = 2;
  rc.train.seed = 90;
  rc.train.aug_flip = false;
  rc.train.aug_rotate = false;
  rc.train.aug_crop = false;
  rc.train.checkpoint_every = 100;  // final checkpoint only
  rc.train.val_every = 100;         // final validation only
  rc.val_count = 2;
  rc.out_dir = out;
  return rc;
}

// 24x24 HR pairs: divisible by 8, so every branch count 1..4 can run.
std::vector<PatchPair> ablate_data(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PatchPair> out;
  for (int i = 0; i < n; ++i) {
    const Tensor hr = synthetic_scene(24, 24, rng);
    out.push_back(synthesize_degradation(hr, "blur_noise", 2, rng,
                                         "toy" + std::to_string(i)));
  }
  return out;
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string f;
  while (std::getline(is, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

TEST_CASE("ablation emits the sweep and grid rows in table order",
          "[ablate]") {
  const fs::path out = fs::temp_directory_path() / "ornet_ablate_rows";
  fs::remove_all(out);
  const auto data = ablate_data(6, 31);
  const auto rows = run_ablation(ablate_base(out.string()), data, 1);

  REQUIRE(rows.size() == 9);

  // Branch sweep first, counts 1..4, published references verbatim.
  const char* const bran_refs[] = {"32.25", "32.40", "32.59", "32.52"};
  for (int i = 0; i < 4; ++i) {
    REQUIRE(rows[i].table == "branch_sweep");
    REQUIRE(rows[i].branch_count == i + 1);
    REQUIRE(rows[i].scheme == "branches=" + std::to_string(i + 1));
    REQUIRE(rows[i].reference_psnr == bran_refs[i]);
    REQUIRE(rows[i].rfa_mode == "dynamic");
    REQUIRE(rows[i].feu_attention);
  }

  // Switch grid in published order with its references.
  struct Want {
    const char* rfa;
    bool feu;
    const char* ref;
  };
  const Want want[] = {{"dynamic", true, "32.59"},
                       {"off", true, "32.34"},
                       {"dynamic", false, "32.23"},
                       {"off", false, "32.11"},
                       {"plain_spatial_attention", true, "32.46"}};
  for (int i = 0; i < 5; ++i) {
    const AblationRow& r = rows[4 + i];
    REQUIRE(r.table == "switch_grid");
    REQUIRE(r.branch_count == 3);
    REQUIRE(r.rfa_mode == want[i].rfa);
    REQUIRE(r.feu_attention == want[i].feu);
    REQUIRE(r.reference_psnr == want[i].ref);
  }

  // Every row actually trained: finite metrics, plausible ranges.
  for (const AblationRow& r : rows) {
    REQUIRE(r.seeds == 1);
    REQUIRE(std::isfinite(r.toy_psnr));
    REQUIRE(r.toy_psnr > 0.0);
    REQUIRE(r.toy_ssim > 0.0);
    REQUIRE(r.toy_ssim <= 1.0);
    REQUIRE(r.toy_l1 > 0.0);
  }

  // Per-run artifacts stayed inside the designated output directory.
  REQUIRE(fs::exists(out / "bran1_seed90" / "metrics.csv"));
  REQUIRE(fs::exists(out / "grid5_seed90" / "metrics.csv"));

  // CSV shape: header + 9 rows, 10 fields each, no stray commas.
  std::ostringstream os;
  write_ablation_csv(os, rows);
  std::istringstream is(os.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  REQUIRE(lines.size() == 10);
  REQUIRE(lines[0] ==
          "table,scheme,branch_count,rfa_mode,feu_attention,seeds,"
          "toy_psnr,toy_ssim,toy_l1,reference_psnr");
  for (size_t i = 1; i < lines.size(); ++i) {
    CAPTURE(lines[i]);
    REQUIRE(csv_fields(lines[i]).size() == 10);
  }
  REQUIRE(csv_fields(lines[3])[9] == "32.59");  // branches=3 reference
}

TEST_CASE("plain spatial attention row equals the one-kernel dynamic row",
          "[ablate]") {
  const fs::path out = fs::temp_directory_path() / "ornet_ablate_sa";
  fs::remove_all(out);
  const auto data = ablate_data(5, 32);
  RunConfig base = ablate_base(out.string());
  base.model.basis_kernels = 1;  // dynamic pool degenerates to plain SA

  const auto rows = run_ablation(base, data, 2);
  const AblationRow& dyn = rows[4];  // switch grid: dynamic + feu on
  const AblationRow& sa = rows[8];   // switch grid: plain SA + feu on
  REQUIRE(dyn.rfa_mode == "dynamic");
  REQUIRE(sa.rfa_mode == "plain_spatial_attention");
  REQUIRE(dyn.toy_psnr == sa.toy_psnr);
  REQUIRE(dyn.toy_ssim == sa.toy_ssim);
  REQUIRE(dyn.toy_l1 == sa.toy_l1);
}

TEST_CASE("ablation adapts explicit branch lists to each count", "[ablate]") {
  REQUIRE(detail::adapt_branch_list({8, 6, 4}, 1) == std::vector<int>{4});
  REQUIRE(detail::adapt_branch_list({8, 6, 4}, 2) == std::vector<int>{6, 4});
  REQUIRE(detail::adapt_branch_list({8, 6, 4}, 3) ==
          std::vector<int>{8, 6, 4});
  REQUIRE(detail::adapt_branch_list({8, 6, 4}, 4) ==
          std::vector<int>{8, 8, 6, 4});
  REQUIRE(detail::adapt_branch_list({}, 2).empty());
}
