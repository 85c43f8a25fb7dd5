#pragma once
// Ablation harness: the branch-count sweep and the module switch grid, run
// at toy scale with fixed seeds and reported next to the full-scale
// reference numbers for context.
//
// Directional claims at toy scale are noisy, so every variant trains once
// per seed and the reported metric is the median across seeds. All variants
// of one comparison share the same seeds, the same dataset, and the same
// step budget — the only thing that changes is the architecture switch under
// study.

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

#include "ornet/config.hpp"
#include "ornet/train.hpp"

namespace ornet {

struct AblationRow {
  std::string table;    // "branch_sweep" or "switch_grid"
  std::string scheme;   // human-readable variant label
  int branch_count = 0;
  std::string rfa_mode;
  bool feu_attention = true;
  int seeds = 0;
  double toy_psnr = 0.0;  // median final-epoch validation PSNR
  double toy_ssim = 0.0;  // median final-epoch validation SSIM
  double toy_l1 = 0.0;    // median final-epoch mean train L1
  std::string reference_psnr;  // published full-scale number, copied verbatim
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Adapts an explicit per-branch list to a different branch count the same
// way the built-in defaults behave: keep the last `n` entries (the
// finest-resolution branches survive), padding with the coarsest entry when
// the list must grow.
inline std::vector<int> adapt_branch_list(const std::vector<int>& base,
                                          int n) {
  if (base.empty()) return {};
  std::vector<int> out;
  for (int i = static_cast<int>(base.size()) - n;
       i < static_cast<int>(base.size()); ++i)
    out.push_back(base[std::max(i, 0)]);
  return out;
}

struct AblationOutcome {
  double psnr, ssim, l1;
};

inline AblationOutcome run_variant(RunConfig rc,
                                   const std::vector<PatchPair>& data,
                                   std::uint64_t seed,
                                   const std::string& run_dir) {
  rc.train.seed = seed;
  rc.out_dir = run_dir;
  const TrainResult res = train_loop(rc, data);
  const EpochStats& last = res.epochs.back();
  return {last.val_psnr, last.val_ssim, res.final_epoch_l1};
}

}  // namespace detail

// Published full-scale ablation numbers (the context column in the CSV).
inline const char* reference_psnr_for_branches(int n) {
  switch (n) {
    case 1: return "32.25";
    case 2: return "32.40";
    case 3: return "32.59";
    case 4: return "32.52";
  }
  return "";
}

// Switch-grid row order is the published table's: (RFA, FEU-attention) =
// (dynamic, on), (off, on), (dynamic, off), (off, off), then the plain
// spatial-attention variant.
struct SwitchVariant {
  RfaMode rfa;
  bool feu;
  const char* reference_psnr;
};

inline const std::vector<SwitchVariant>& switch_grid() {
  static const std::vector<SwitchVariant> grid = {
      {RfaMode::kDynamic, true, "32.59"},
      {RfaMode::kOff, true, "32.34"},
      {RfaMode::kDynamic, false, "32.23"},
      {RfaMode::kOff, false, "32.11"},
      {RfaMode::kPlainSpatialAttention, true, "32.46"},
  };
  return grid;
}

// Runs the full ablation: 4 branch-sweep rows then 5 switch-grid rows.
//
// `base` supplies the model/train preset shared by every variant; each
// variant trains `seed_count` times with seeds base.train.seed + 0,1,...
// Per-run artifacts land under base.out_dir/<row>_<seed>/.
inline std::vector<AblationRow> run_ablation(
    const RunConfig& base, const std::vector<PatchPair>& data,
    int seed_count = 3) {
  if (seed_count < 1) throw ConfigError("ablation needs at least one seed");
  std::vector<AblationRow> rows;

  auto measure = [&](const RunConfig& rc, const std::string& label,
                     AblationRow row) {
    std::vector<double> ps, ss, ls;
    for (int s = 0; s < seed_count; ++s) {
      const std::uint64_t seed = base.train.seed + static_cast<std::uint64_t>(s);
      const std::string dir =
          base.out_dir + "/" + label + "_seed" + std::to_string(seed);
      const detail::AblationOutcome o =
          detail::run_variant(rc, data, seed, dir);
      ps.push_back(o.psnr);
      ss.push_back(o.ssim);
      ls.push_back(o.l1);
    }
    row.seeds = seed_count;
    row.toy_psnr = detail::median_of(ps);
    row.toy_ssim = detail::median_of(ss);
    row.toy_l1 = detail::median_of(ls);
    rows.push_back(std::move(row));
  };

  // Branch-count sweep: everything else stays at the base preset.
  const auto base_channels = base.model.resolved_branch_channels();
  const auto base_feus = base.model.resolved_feu_counts();
  for (int n = 1; n <= 4; ++n) {
    RunConfig rc = base;
    rc.model.branch_count = n;
    rc.model.branch_channels = detail::adapt_branch_list(base_channels, n);
    rc.model.feu_counts = detail::adapt_branch_list(base_feus, n);
    rc.model.validate();
    AblationRow row;
    row.table = "branch_sweep";
    row.scheme = "branches=" + std::to_string(n);
    row.branch_count = n;
    row.rfa_mode = rfa_mode_name(rc.model.rfa_mode);
    row.feu_attention = rc.model.feu_attention;
    row.reference_psnr = reference_psnr_for_branches(n);
    measure(rc, "bran" + std::to_string(n), std::move(row));
  }

  // Switch grid at the base branch count.
  int gi = 0;
  for (const SwitchVariant& sv : switch_grid()) {
    ++gi;
    RunConfig rc = base;
    rc.model.rfa_mode = sv.rfa;
    rc.model.feu_attention = sv.feu;
    rc.model.validate();
    AblationRow row;
    row.table = "switch_grid";
    row.scheme = std::string("rfa=") + rfa_mode_name(sv.rfa) +
                 "+feu_attention=" + (sv.feu ? "on" : "off");
    row.branch_count = rc.model.branch_count;
    row.rfa_mode = rfa_mode_name(sv.rfa);
    row.feu_attention = sv.feu;
    row.reference_psnr = sv.reference_psnr;
    measure(rc, "grid" + std::to_string(gi), std::move(row));
  }

  return rows;
}

inline void write_ablation_csv(std::ostream& os,
                               const std::vector<AblationRow>& rows) {
  os << "table,scheme,branch_count,rfa_mode,feu_attention,seeds,"
        "toy_psnr,toy_ssim,toy_l1,reference_psnr\n";
  for (const AblationRow& r : rows) {
    os << r.table << "," << r.scheme << "," << r.branch_count << ","
       << r.rfa_mode << "," << (r.feu_attention ? "on" : "off") << ","
       << r.seeds << "," << detail::format_double(r.toy_psnr) << ","
       << detail::format_double(r.toy_ssim) << ","
       << detail::format_double(r.toy_l1) << "," << r.reference_psnr << "\n";
  }
}

}  // namespace ornet
