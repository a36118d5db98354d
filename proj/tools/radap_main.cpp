#include <CLI11.hpp>
#include <iostream>

#include "radap/cli/stages.hpp"

namespace {

struct CommonArgs {
  std::string config_path = "configs/default.json";
  radap::cli::StageOverrides overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file (JSON)");
  cmd->add_option("--threads", args.overrides.threads, "worker threads (0 = all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radap - adversarial patch defense pipeline for face recognition"};
  app.require_subcommand(1);

  CommonArgs args;

  // per-stage flag overrides applied on top of the config file
  std::string mask_kind, attack_mask, attack_goal;
  std::vector<int> mask_size;
  std::vector<double> mask_area;
  double mask_delta = -1.0;
  int mask_rects = -1;
  std::int64_t seed_flag = -1;
  int saf_n = -1;
  bool no_saf = false;
  bool adaptive = false;

  auto* c_mask = app.add_subcommand("mask", "sample or load a patch mask and write it as PGM");
  add_common(c_mask, args);
  c_mask->add_option("--kind", mask_kind, "fmask|rmask|glasses|sticker|respirator");
  c_mask->add_option("--size", mask_size, "mask size H W")->expected(2);
  c_mask->add_option("--seed", seed_flag, "sampling seed");
  c_mask->add_option("--out", args.overrides.out_path, "output directory");
  c_mask->add_option("--delta", mask_delta, "F-mask decay power");
  c_mask->add_option("--area", mask_area, "F-mask area range a b")->expected(2);
  c_mask->add_option("--rects", mask_rects, "R-mask rectangle count");

  auto* c_train_fr = app.add_subcommand("train-fr", "train the recognition model");
  add_common(c_train_fr, args);
  c_train_fr->add_option("--seed", seed_flag, "training seed");

  auto* c_gen = app.add_subcommand("gen-fpatch", "generate the patch dataset for the segmenter");
  add_common(c_gen, args);
  c_gen->add_option("--fr", args.overrides.fr_path, "recognition checkpoint override");

  auto* c_seg = app.add_subcommand("train-segmenter", "train the patch segmenter");
  add_common(c_seg, args);

  auto* c_attack = app.add_subcommand("attack", "run a masked PGD attack on one image");
  add_common(c_attack, args);
  c_attack->add_option("--image", args.overrides.image_path, "source image (PPM)");
  c_attack->add_option("--mask", attack_mask, "mask kind for the attack");
  c_attack->add_option("--goal", attack_goal, "evasion|impersonation");
  c_attack->add_flag("--adaptive", adaptive, "BPDA attack through the defended pipeline");
  c_attack->add_option("--fr", args.overrides.fr_path, "recognition checkpoint override");
  c_attack->add_option("--segmenter", args.overrides.segmenter_path, "segmenter checkpoint override");

  auto* c_defend = app.add_subcommand("defend", "run the defended pipeline on one image");
  add_common(c_defend, args);
  c_defend->add_option("--image", args.overrides.image_path, "input image (PPM)");
  c_defend->add_option("--segmenter", args.overrides.segmenter_path, "segmenter checkpoint");
  c_defend->add_option("--fr", args.overrides.fr_path, "recognition checkpoint");
  c_defend->add_option("--saf-n", saf_n, "SAF subgrid count (0 disables SAF)");
  c_defend->add_flag("--no-saf", no_saf, "disable SAF");
  c_defend->add_option("--out-mask", args.overrides.out_path, "predicted mask output path");

  auto* c_eval = app.add_subcommand("evaluate", "run the experiment grid");
  add_common(c_eval, args);
  c_eval->add_option("--out", args.overrides.out_path, "report directory");
  c_eval->add_option("--fr", args.overrides.fr_path, "recognition checkpoint override");
  c_eval->add_option("--segmenter", args.overrides.segmenter_path, "segmenter checkpoint override");

  auto* c_plot = app.add_subcommand("plot", "render charts from an evaluation report");
  add_common(c_plot, args);
  c_plot->add_option("--report", args.overrides.image_path, "report directory");
  c_plot->add_option("--out", args.overrides.out_path, "chart directory");

  auto* c_validate = app.add_subcommand("validate", "check a configuration file");
  add_common(c_validate, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_validate->parsed()) {
      const auto problems = radap::cli::validate_config(args.config_path);
      if (problems.empty()) {
        std::cout << "config ok: " << args.config_path << "\n";
        return 0;
      }
      for (const auto& p : problems) std::cerr << p << "\n";
      return 2;
    }

    radap::cli::RunConfig config = radap::cli::parse_config(args.config_path);
    if (seed_flag >= 0) config.seed = static_cast<std::uint64_t>(seed_flag);
    if (!mask_kind.empty()) config.mask.kind = mask_kind;
    if (mask_size.size() == 2) {
      config.mask.height = mask_size[0];
      config.mask.width = mask_size[1];
    }
    if (mask_delta > 0.0) config.mask.delta = mask_delta;
    if (mask_area.size() == 2) {
      config.mask.area_min = mask_area[0];
      config.mask.area_max = mask_area[1];
    }
    if (mask_rects >= 0) config.mask.rects = mask_rects;
    if (!attack_mask.empty()) config.attack.mask = attack_mask;
    if (!attack_goal.empty()) config.attack.goal = attack_goal;
    if (adaptive) config.attack.adaptive = true;
    if (no_saf) config.defend.use_saf = false;
    if (saf_n == 0) config.defend.use_saf = false;
    if (saf_n > 0) config.defend.saf_n = saf_n;

    radap::cli::Stage stage;
    if (c_mask->parsed()) stage = radap::cli::Stage::mask;
    else if (c_train_fr->parsed()) stage = radap::cli::Stage::train_fr;
    else if (c_gen->parsed()) stage = radap::cli::Stage::gen_fpatch;
    else if (c_seg->parsed()) stage = radap::cli::Stage::train_segmenter;
    else if (c_attack->parsed()) stage = radap::cli::Stage::attack;
    else if (c_defend->parsed()) stage = radap::cli::Stage::defend;
    else if (c_eval->parsed()) stage = radap::cli::Stage::evaluate;
    else stage = radap::cli::Stage::plot;

    radap::cli::run_stage(stage, config, args.overrides);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return radap::cli::exit_code_for(e);
  }
}
