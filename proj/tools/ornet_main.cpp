// ornet: command-line interface to the OR-Net super-resolution kit.
//
// Subcommands: train, eval, analyze, ablate, decompose (an alias for
// analyze --mode decompose-dump). Exit codes: 0 success, 1 runtime failure,
// 2 usage/configuration error. Error text goes to standard error; all file
// outputs stay inside the designated output directory.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ornet/ornet.hpp"

namespace fs = std::filesystem;
using namespace ornet;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers.
// ---------------------------------------------------------------------------

std::string path_stem(const std::string& path) {
  return fs::path(path).stem().string();
}

// The CLI contract wants a missing manifest reported as a configuration
// error (exit 2) that names the path; probe the file before the data layer
// touches it.
void require_readable(const std::string& path, const char* what) {
  std::ifstream probe(path);
  if (!probe)
    throw ConfigError(std::string("cannot open ") + what + " " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// Assembles the final override list: --set pairs in order, then the --seed
// and --out shorthands (which therefore win).
std::vector<std::string> final_overrides(std::vector<std::string> sets,
                                         const std::string& seed,
                                         const std::string& out) {
  if (!seed.empty()) sets.push_back("seed=" + seed);
  if (!out.empty()) sets.push_back("out_dir=" + out);
  return sets;
}

Tensor image_to_input(const Tensor& img) { return stack_batch({img}); }

// Branch label, coarsest-first: low, mid(, mid2...), high.
std::string band_label(int i, int count) {
  if (count == 1) return "full";
  if (i == 0) return "low";
  if (i == count - 1) return "high";
  if (count == 3) return "mid";
  return "mid" + std::to_string(i);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, seed, out, resume;
  std::vector<std::string> sets;
};

void run_train(const TrainArgs& a) {
  const RunConfig rc =
      load_run_config(a.config, final_overrides(a.sets, a.seed, a.out));
  if (rc.manifest.empty())
    throw ConfigError(
        "training needs a dataset manifest (set manifest=... in the config "
        "or pass --set manifest=PATH)");
  require_readable(rc.manifest, "manifest");

  Rng data_rng(rc.train.seed);
  const std::vector<PatchPair> data = load_dataset(rc.manifest, data_rng);

  fs::create_directories(rc.out_dir);
  write_text_file(rc.out_dir + "/config.txt", canonical_text(rc));

  const TrainResult res = train_loop(rc, data, a.resume);

  std::cout << "trained " << res.steps_run << " steps over "
            << res.epochs.size() << " epochs on " << data.size()
            << " pairs\n";
  if (!res.epochs.empty()) {
    const EpochStats& last = res.epochs.back();
    std::cout << "final epoch: mean L1 " << detail::format_double(last.mean_l1);
    if (last.validated)
      std::cout << ", val PSNR " << detail::format_double(last.val_psnr)
                << " dB, val SSIM " << detail::format_double(last.val_ssim);
    std::cout << "\n";
  }
  std::cout << "metrics: " << res.metrics_path << "\n"
            << "checkpoint: " << res.last_checkpoint_path << "\n"
            << "config echo: " << rc.out_dir << "/config.txt\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, manifest, config, seed = "0", out;
  std::vector<std::string> sets;
};

void run_eval(const EvalArgs& a) {
  require_readable(a.checkpoint, "checkpoint");
  const Checkpoint cp = load_checkpoint(a.checkpoint);

  // When the caller supplies a config, its model section must match the
  // checkpoint; this is the explicit-incompatibility path.
  if (!a.config.empty() || !a.sets.empty()) {
    const RunConfig rc =
        load_run_config(a.config, final_overrides(a.sets, "", ""));
    const std::uint64_t want = model_config_hash(rc.model);
    if (want != cp.model_hash)
      throw ConfigError(
          "checkpoint " + a.checkpoint +
          " is incompatible with the requested model config (config hash " +
          std::to_string(want) + ", checkpoint hash " +
          std::to_string(cp.model_hash) + ")");
  }
  OrNet model = model_from_checkpoint(cp);

  require_readable(a.manifest, "manifest");
  Rng rng(detail::parse_u64("seed", a.seed));
  const std::vector<PatchPair> data = load_dataset(a.manifest, rng);
  if (data.empty()) throw ConfigError("evaluation manifest lists no pairs");

  std::ostringstream csv;
  csv << "image,psnr_model,ssim_model,psnr_bicubic,ssim_bicubic\n";
  NoGradGuard ng;
  double pm = 0, sm = 0, pb = 0, sb = 0;
  for (const PatchPair& p : data) {
    const Tensor up = bicubic_resize(p.lr, p.hr.dim(1), p.hr.dim(2));
    const Tensor sr = detail::squeeze_batch1(model.forward(image_to_input(up)));
    const double psnr_model = psnr(sr, p.hr);
    const double ssim_model = ssim(sr, p.hr);
    const double psnr_bi = psnr(up, p.hr);
    const double ssim_bi = ssim(up, p.hr);
    pm += psnr_model;
    sm += ssim_model;
    pb += psnr_bi;
    sb += ssim_bi;
    csv << p.source_id << "," << detail::format_double(psnr_model) << ","
        << detail::format_double(ssim_model) << ","
        << detail::format_double(psnr_bi) << ","
        << detail::format_double(ssim_bi) << "\n";
  }
  const double n = static_cast<double>(data.size());
  csv << "mean," << detail::format_double(pm / n) << ","
      << detail::format_double(sm / n) << "," << detail::format_double(pb / n)
      << "," << detail::format_double(sb / n) << "\n";

  std::cout << csv.str();
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text_file(a.out + "/eval.csv", csv.str());
    std::cout << "written: " << a.out << "/eval.csv\n";
  }
}

// ---------------------------------------------------------------------------
// analyze (and its decompose alias)
// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string mode = "degradation";
  std::vector<std::string> inputs;
  std::string checkpoint, out = "out", kind = "bicubic", seed = "0";
  int scale = 2;
  int levels = 4;
  int branches = 3;
};

// Parameter-free stand-in for the learned trunk: an identity 1x1 stem plus
// 2x2 box-mean halvings, so the band split of a raw image can be visualized
// without a trained model.
std::vector<Tensor> image_bands(const Tensor& img, int branches) {
  std::vector<Conv2dParams> trunk;
  Conv2dParams ident;
  {
    Tensor w = Tensor::zeros({3, 3, 1, 1});
    auto& v = w.mutable_values();
    for (int c = 0; c < 3; ++c) v[static_cast<size_t>(c) * 3 + c] = 1.0;
    ident.weight = w;
    ident.stride = 1;
  }
  trunk.push_back(ident);
  for (int b = 1; b < branches; ++b) {
    Conv2dParams mean;
    Tensor w = Tensor::zeros({3, 3, 2, 2});
    auto& v = w.mutable_values();
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 4; ++k)
        v[(static_cast<size_t>(c) * 3 + c) * 4 + static_cast<size_t>(k)] =
            0.25;
    mean.weight = w;
    mean.stride = 2;
    trunk.push_back(mean);
  }
  return decompose_bands(stem_pyramid(image_to_input(img), trunk));
}

void run_analyze(const AnalyzeArgs& a) {
  if (a.mode != "degradation" && a.mode != "feature-bands" &&
      a.mode != "decompose-dump")
    throw ConfigError("analyze: unknown mode '" + a.mode +
                      "' (use degradation, feature-bands or decompose-dump)");
  if (a.inputs.empty())
    throw ConfigError("analyze: no input images given");
  if (a.levels < 1) throw ConfigError("analyze: levels must be >= 1");
  if (a.branches < 1 || a.branches > 4)
    throw ConfigError("analyze: branches must be in 1..4");

  fs::create_directories(a.out);
  Rng rng(detail::parse_u64("seed", a.seed));

  if (a.mode == "degradation") {
    // Degrade each input with the requested pipeline, come back up to HR
    // size, and profile where the lost energy lived.
    std::vector<BandEnergyProfile> profiles;
    for (const std::string& in : a.inputs) {
      require_readable(in, "image");
      const Tensor hr = decode_image(in);
      const PatchPair p =
          synthesize_degradation(hr, a.kind, a.scale, rng, path_stem(in));
      const Tensor up = bicubic_resize(p.lr, hr.dim(1), hr.dim(2));
      profiles.push_back(
          degradation_profile(hr, up, a.levels, path_stem(in)));
    }
    std::ostringstream os;
    write_profile_csv(os, profiles);
    std::cout << os.str();
    write_text_file(a.out + "/degradation.csv", os.str());
    std::cout << "written: " << a.out << "/degradation.csv\n";
    return;
  }

  if (a.mode == "feature-bands") {
    if (a.checkpoint.empty())
      throw ConfigError("analyze --mode feature-bands needs --checkpoint");
    require_readable(a.checkpoint, "checkpoint");
    const OrNet model = model_from_checkpoint(load_checkpoint(a.checkpoint));
    const int bc = model.config().branch_count;
    NoGradGuard ng;
    std::vector<BandEnergyProfile> profiles;
    for (const std::string& in : a.inputs) {
      require_readable(in, "image");
      const Tensor img = decode_image(in);
      const OrNet::Trace tr = model.forward_trace(image_to_input(img));
      for (int b = 0; b < bc; ++b)
        profiles.push_back(feature_band_profile(
            tr.enhanced[static_cast<size_t>(b)], a.levels,
            path_stem(in) + ":" + band_label(b, bc)));
    }
    std::ostringstream os;
    write_profile_csv(os, profiles);
    std::cout << os.str();
    write_text_file(a.out + "/feature_bands.csv", os.str());
    std::cout << "written: " << a.out << "/feature_bands.csv\n";
    return;
  }

  // decompose-dump: one normalized PGM per band per input.
  std::optional<OrNet> model;
  if (!a.checkpoint.empty()) {
    require_readable(a.checkpoint, "checkpoint");
    model = model_from_checkpoint(load_checkpoint(a.checkpoint));
  }
  NoGradGuard ng;
  for (const std::string& in : a.inputs) {
    require_readable(in, "image");
    const Tensor img = decode_image(in);
    std::vector<Tensor> bands;
    int bc = a.branches;
    if (model.has_value()) {
      bc = model->config().branch_count;
      bands = model->forward_trace(image_to_input(img)).bands;
    } else {
      bands = image_bands(img, bc);
    }
    for (int b = 0; b < bc; ++b) {
      const Plane p = channel_mean_abs(bands[static_cast<size_t>(b)]);
      const std::string path = a.out + "/" + path_stem(in) + "_f_" +
                               band_label(b, bc) + ".pgm";
      write_pgm(p, path);
      std::cout << "written: " << path << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string config, seed, out;
  std::vector<std::string> sets;
  int seeds = 3;
};

void run_ablate(const AblateArgs& a) {
  const RunConfig rc =
      load_run_config(a.config, final_overrides(a.sets, a.seed, a.out));
  if (rc.manifest.empty())
    throw ConfigError("ablation needs a dataset manifest in its config");
  require_readable(rc.manifest, "manifest");
  if (a.seeds < 1) throw ConfigError("--seeds must be >= 1");

  Rng data_rng(rc.train.seed);
  const std::vector<PatchPair> data = load_dataset(rc.manifest, data_rng);

  fs::create_directories(rc.out_dir);
  write_text_file(rc.out_dir + "/config.txt", canonical_text(rc));

  const std::vector<AblationRow> rows = run_ablation(rc, data, a.seeds);

  std::ostringstream os;
  write_ablation_csv(os, rows);
  std::cout << os.str();
  write_text_file(rc.out_dir + "/ablation.csv", os.str());
  std::cout << "written: " << rc.out_dir << "/ablation.csv\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OR-Net omni-frequency super-resolution kit"};
  app.require_subcommand(1);

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "Train a model per a config");
  train->add_option("--config", ta.config, "key=value config file");
  train->add_option("--set", ta.sets, "override KEY=VALUE (repeatable)");
  train->add_option("--seed", ta.seed, "shorthand for --set seed=N");
  train->add_option("--out", ta.out, "shorthand for --set out_dir=DIR");
  train->add_option("--resume", ta.resume, "checkpoint to continue from");

  EvalArgs ea;
  CLI::App* eval = app.add_subcommand(
      "eval", "Evaluate a checkpoint against a manifest (PSNR/SSIM CSV)");
  eval->add_option("--checkpoint", ea.checkpoint, "ORNT checkpoint file")
      ->required();
  eval->add_option("--manifest", ea.manifest, "dataset manifest")->required();
  eval->add_option("--config", ea.config,
                   "optional config; must match the checkpoint");
  eval->add_option("--set", ea.sets, "override KEY=VALUE (repeatable)");
  eval->add_option("--seed", ea.seed, "seed for synthetic manifest entries");
  eval->add_option("--out", ea.out, "also write eval.csv here");

  AnalyzeArgs na;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "Frequency-band analysis of images or model features");
  analyze->add_option("--mode", na.mode,
                      "degradation | feature-bands | decompose-dump");
  analyze->add_option("inputs", na.inputs, "input images")->required();
  analyze->add_option("--checkpoint", na.checkpoint,
                      "checkpoint (feature modes)");
  analyze->add_option("--out", na.out, "output directory (default out)");
  analyze->add_option("--kind", na.kind,
                      "degradation kind: bicubic | blur_noise");
  analyze->add_option("--scale", na.scale, "degradation scale (default 2)");
  analyze->add_option("--levels", na.levels, "analysis levels (default 4)");
  analyze->add_option("--branches", na.branches,
                      "bands for checkpoint-free decompose-dump (default 3)");
  analyze->add_option("--seed", na.seed, "seed for degradation draws");

  AnalyzeArgs da;
  CLI::App* decompose = app.add_subcommand(
      "decompose", "Alias for analyze --mode decompose-dump");
  decompose->add_option("inputs", da.inputs, "input images")->required();
  decompose->add_option("--checkpoint", da.checkpoint,
                        "checkpoint for learned bands");
  decompose->add_option("--out", da.out, "output directory (default out)");
  decompose->add_option("--branches", da.branches,
                        "bands when checkpoint-free (default 3)");

  AblateArgs aa;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "Branch sweep + switch grid at toy scale, CSV output");
  ablate->add_option("--config", aa.config, "toy preset config")->required();
  ablate->add_option("--set", aa.sets, "override KEY=VALUE (repeatable)");
  ablate->add_option("--seed", aa.seed, "shorthand for --set seed=N");
  ablate->add_option("--out", aa.out, "shorthand for --set out_dir=DIR");
  ablate->add_option("--seeds", aa.seeds, "seeds per variant (default 3)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (*train) run_train(ta);
    if (*eval) run_eval(ea);
    if (*analyze) run_analyze(na);
    if (*decompose) {
      da.mode = "decompose-dump";
      run_analyze(da);
    }
    if (*ablate) run_ablate(aa);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
