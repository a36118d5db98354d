#include "radap/cli/stages.hpp"

#include <fstream>
#include <iostream>

#include "radap/core/fingerprint.hpp"
#include "radap/core/pnm.hpp"
#include "radap/evalkit/evalkit.hpp"

namespace radap::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path artifact_root(const RunConfig& config) {
  if (const char* env = std::getenv("RADAP_ARTIFACTS")) return env;
  return config.artifact_dir;
}

fs::path stage_dir(const RunConfig& config, const char* name) {
  const fs::path dir = artifact_root(config) / name;
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& dir, const char* stage, const RunConfig& config,
                    const std::vector<fs::path>& inputs, const std::vector<std::string>& outputs) {
  json m;
  m["stage"] = stage;
  m["version"] = "radap 0.1";
  m["config"] = config.snapshot;
  json in = json::object();
  for (const auto& p : inputs)
    in[p.string()] = core::fingerprint_hex(core::fingerprint_file(p));
  m["inputs"] = in;
  m["outputs"] = outputs;
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << "\n";
  if (!out) throw IoError("cannot write manifest in " + dir.string());
}

fs::path require_artifact(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path))
    throw DependencyError("missing upstream artifact " + path.string() + "; " + hint);
  return path;
}

std::uint64_t config_fingerprint(const RunConfig& config) {
  return core::fnv1a64(config.snapshot.dump());
}

data::Dataset load_dataset(const RunConfig& config) {
  if (config.dataset.kind == "directory") return data::load_directory(config.dataset.path);
  data::ToyFacesConfig tc;
  tc.identities = config.dataset.identities;
  tc.images_per_identity = config.dataset.images_per_identity;
  tc.height = config.dataset.height;
  tc.width = config.dataset.width;
  tc.seed = config.seed;
  return data::generate_toyfaces(tc);
}

augment::AugmentPolicy augment_policy(const TrainFrConfig& c, std::uint64_t seed) {
  augment::AugmentPolicy policy;
  if (c.augment == "cutout")
    policy.kind = augment::AugmentKind::cutout;
  else if (c.augment == "fcutout")
    policy.kind = augment::AugmentKind::fcutout;
  else
    policy.kind = augment::AugmentKind::none;
  policy.fmask_config.decay_power = c.fcutout_delta;
  policy.fmask_config.area_min = c.fcutout_area_min;
  policy.fmask_config.area_max = c.fcutout_area_max;
  policy.fmask_config.seed = seed;
  policy.fill_value = c.fill;
  policy.apply_probability = c.apply_probability;
  return policy;
}

void stage_mask(const RunConfig& config, const StageOverrides& overrides) {
  const fs::path dir = overrides.out_path.empty() ? stage_dir(config, "mask")
                                                  : fs::path(overrides.out_path);
  fs::create_directories(dir);
  const MaskStageConfig& mc = config.mask;
  std::vector<std::string> outputs;
  core::Rng rng(config.seed);
  for (int i = 0; i < mc.count; ++i) {
    BinaryMask mask;
    if (mc.kind == "fmask") {
      fmask::FMaskConfig fc;
      fc.height = mc.height;
      fc.width = mc.width;
      fc.decay_power = mc.delta;
      fc.area_min = mc.area_min;
      fc.area_max = mc.area_max;
      mask = fmask::sample_fmask(fc, rng);
    } else if (mc.kind == "rmask") {
      mask = fmask::sample_rmask(mc.height, mc.width, mc.rects, {0.1, 0.4}, rng);
    } else {
      mask = fmask::load_predefined_mask(mc.kind, mc.height, mc.width);
    }
    char name[32];
    std::snprintf(name, sizeof(name), "mask_%03d.pgm", i);
    core::write_mask_pgm(dir / name, mask);
    outputs.emplace_back(name);
    std::cout << "mask " << name << ": " << mask.ones_count() << " / "
              << mask.height() * mask.width() << " pixels set\n";
  }
  write_manifest(dir, "mask", config, {}, outputs);
}

void stage_train_fr(const RunConfig& config, const StageOverrides&) {
  const fs::path dir = stage_dir(config, "train-fr");
  const data::Dataset full = load_dataset(config);
  const auto split = data::split_per_identity(full, full.num_classes, config.dataset.train_fraction);

  models::TrainConfig tc;
  tc.mode = config.train_fr.mode == "open_set" ? models::Mode::open_set : models::Mode::closed_set;
  tc.epochs = config.train_fr.epochs;
  tc.batch_size = config.train_fr.batch_size;
  tc.lr = config.train_fr.lr;
  tc.momentum = config.train_fr.momentum;
  tc.weight_decay = config.train_fr.weight_decay;
  tc.nesterov = config.train_fr.nesterov;
  tc.widths = config.train_fr.widths;
  tc.seed = config.seed;
  tc.augment = augment_policy(config.train_fr, config.seed);

  std::vector<models::EpochLog> log;
  const models::RecognitionModel model = models::train_model(split.train, tc, &log);

  models::save_checkpoint(model, dir / "model.ckpt", config_fingerprint(config));
  json jlog = json::array();
  for (const auto& e : log)
    jlog.push_back({{"epoch", e.epoch}, {"loss", e.train_loss}, {"accuracy", e.train_accuracy}});
  std::ofstream(dir / "train_log.json") << jlog.dump(2) << "\n";

  const double test_acc = evalkit::closed_set_accuracy(model, split.test);
  std::cout << "train-fr: final train loss " << (log.empty() ? 0.0 : log.back().train_loss)
            << ", clean test accuracy " << test_acc << "%\n";
  write_manifest(dir, "train-fr", config, {}, {"model.ckpt", "model.ckpt.json", "train_log.json"});
}

void stage_gen_fpatch(const RunConfig& config, const StageOverrides& overrides) {
  const fs::path dir = stage_dir(config, "gen-fpatch");
  const fs::path fr_path = overrides.fr_path.empty()
                               ? require_artifact(artifact_root(config) / "train-fr" / "model.ckpt",
                                                  "run `radap train-fr` first")
                               : fs::path(overrides.fr_path);
  const models::RecognitionModel fr = models::load_checkpoint(fr_path);
  const data::Dataset full = load_dataset(config);
  const auto split = data::split_per_identity(full, full.num_classes, config.dataset.train_fraction);

  attack::FPatchConfig fc;
  fc.fmask.decay_power = config.gen_fpatch.delta;
  fc.fmask.area_min = config.gen_fpatch.area_min;
  fc.fmask.area_max = config.gen_fpatch.area_max;
  fc.fmask.height = config.dataset.height;
  fc.fmask.width = config.dataset.width;
  fc.alpha = config.gen_fpatch.alpha;
  fc.epsilon = config.gen_fpatch.epsilon;
  fc.t_max = config.gen_fpatch.t_max;

  core::Rng rng(core::derive_seed(config.seed, 0x9f));
  const auto samples = attack::generate_fpatch_dataset(split.train, fr, fc,
                                                       config.gen_fpatch.count, rng,
                                                       overrides.threads);
  attack::save_fpatch_dataset(samples, dir / "samples");
  std::cout << "gen-fpatch: wrote " << samples.size() << " samples\n";
  write_manifest(dir, "gen-fpatch", config, {fr_path}, {"samples"});
}

void stage_train_segmenter(const RunConfig& config, const StageOverrides&) {
  const fs::path dir = stage_dir(config, "train-segmenter");
  const fs::path samples_dir =
      require_artifact(artifact_root(config) / "gen-fpatch" / "samples" / "manifest.json",
                       "run `radap gen-fpatch` first")
          .parent_path();
  const auto samples = attack::load_fpatch_dataset(samples_dir);

  segmenter::SegTrainConfig sc;
  sc.epochs = config.train_segmenter.epochs;
  sc.batch_size = config.train_segmenter.batch_size;
  sc.lr = config.train_segmenter.lr;
  sc.beta = config.train_segmenter.beta;
  sc.widths = config.train_segmenter.widths;
  sc.seed = core::derive_seed(config.seed, 0x5e);

  std::vector<segmenter::SegEpochLog> log;
  const segmenter::PatchSegmenter seg =
      segmenter::train_segmenter(attack::to_seg_samples(samples), sc, &log);
  segmenter::save_checkpoint(seg, dir / "segmenter.ckpt", config_fingerprint(config));
  json jlog = json::array();
  for (const auto& e : log) jlog.push_back({{"epoch", e.epoch}, {"loss", e.train_loss}});
  std::ofstream(dir / "train_log.json") << jlog.dump(2) << "\n";
  std::cout << "train-segmenter: final loss " << (log.empty() ? 0.0 : log.back().train_loss)
            << "\n";
  write_manifest(dir, "train-segmenter", config, {samples_dir / "manifest.json"},
                 {"segmenter.ckpt", "segmenter.ckpt.json", "train_log.json"});
}

void stage_attack(const RunConfig& config, const StageOverrides& overrides) {
  const fs::path dir = stage_dir(config, "attack");
  const fs::path fr_path = overrides.fr_path.empty()
                               ? require_artifact(artifact_root(config) / "train-fr" / "model.ckpt",
                                                  "run `radap train-fr` first")
                               : fs::path(overrides.fr_path);
  const models::RecognitionModel fr = models::load_checkpoint(fr_path);

  Image source;
  int label = 0;
  if (!overrides.image_path.empty()) {
    source = core::read_ppm(overrides.image_path);
  } else {
    const data::Dataset full = load_dataset(config);
    const auto split = data::split_per_identity(full, full.num_classes, config.dataset.train_fraction);
    source = split.test.images.at(0);
    label = split.test.labels.at(0);
  }

  core::Rng rng(core::derive_seed(config.seed, 0xa7));
  BinaryMask mask;
  if (config.attack.mask == "fmask") {
    fmask::FMaskConfig fc;
    fc.height = source.height();
    fc.width = source.width();
    mask = fmask::sample_fmask(fc, rng);
  } else if (config.attack.mask == "rmask") {
    mask = fmask::sample_rmask_default(source.height(), source.width(), rng);
  } else {
    mask = fmask::load_predefined_mask(config.attack.mask, source.height(), source.width());
  }

  attack::AttackSpec spec;
  spec.system = models::Mode::closed_set;
  spec.goal = config.attack.goal == "impersonation" ? attack::Goal::impersonation
                                                    : attack::Goal::evasion;
  spec.mask = mask;
  spec.alpha = config.attack.alpha;
  spec.epsilon = config.attack.epsilon;
  spec.steps = config.attack.steps;
  spec.source = source;
  spec.label_source = label;
  if (spec.goal == attack::Goal::impersonation)
    spec.label_target = (label + 1) % std::max(1, fr.num_classes());
  spec.adaptive = config.attack.adaptive;
  spec.sigmoid_temperature = config.attack.sigmoid_temperature;
  spec.paper_literal_sign = config.attack.paper_literal_sign;

  attack::AttackTrace trace;
  Image attacked;
  std::vector<fs::path> inputs{fr_path};
  segmenter::PatchSegmenter seg;
  if (spec.adaptive) {
    const fs::path seg_path =
        overrides.segmenter_path.empty()
            ? require_artifact(artifact_root(config) / "train-segmenter" / "segmenter.ckpt",
                               "run `radap train-segmenter` first")
            : fs::path(overrides.segmenter_path);
    seg = segmenter::load_checkpoint(seg_path);
    defense::DefensePipeline pipeline;
    pipeline.segmenter = &seg;
    pipeline.fr_model = &fr;
    pipeline.fill_value = config.defend.fill;
    if (config.defend.use_saf) pipeline.saf = defense::SafConfig{config.defend.saf_n, {}};
    attacked = attack::pgd_patch_attack(spec, fr, &pipeline, &trace);
    inputs.push_back(seg_path);
  } else {
    attacked = attack::pgd_patch_attack(spec, fr, nullptr, &trace);
  }

  core::write_ppm(dir / "attacked.ppm", attacked);
  core::write_mask_pgm(dir / "mask.pgm", mask);
  json report{{"objective_start", trace.objective_start},
              {"objective_end", trace.objective_end},
              {"label", label},
              {"predicted_clean", fr.predict_label(source)},
              {"predicted_attacked", fr.predict_label(attacked)}};
  std::ofstream(dir / "report.json") << report.dump(2) << "\n";
  std::cout << "attack: objective " << trace.objective_start << " -> " << trace.objective_end
            << "\n";
  write_manifest(dir, "attack", config, inputs, {"attacked.ppm", "mask.pgm", "report.json"});
}

void stage_defend(const RunConfig& config, const StageOverrides& overrides) {
  const fs::path dir = stage_dir(config, "defend");
  const fs::path fr_path = overrides.fr_path.empty()
                               ? require_artifact(artifact_root(config) / "train-fr" / "model.ckpt",
                                                  "run `radap train-fr` first")
                               : fs::path(overrides.fr_path);
  const fs::path seg_path =
      overrides.segmenter_path.empty()
          ? require_artifact(artifact_root(config) / "train-segmenter" / "segmenter.ckpt",
                             "run `radap train-segmenter` first")
          : fs::path(overrides.segmenter_path);
  const models::RecognitionModel fr = models::load_checkpoint(fr_path);
  const segmenter::PatchSegmenter seg = segmenter::load_checkpoint(seg_path);

  Image image;
  if (!overrides.image_path.empty())
    image = core::read_ppm(overrides.image_path);
  else
    image = core::read_ppm(require_artifact(artifact_root(config) / "attack" / "attacked.ppm",
                                            "run `radap attack` first or pass --image"));

  defense::DefensePipeline pipeline;
  pipeline.segmenter = &seg;
  pipeline.fr_model = &fr;
  pipeline.fill_value = config.defend.fill;
  if (config.defend.use_saf) pipeline.saf = defense::SafConfig{config.defend.saf_n, {}};
  const defense::DefenseOutcome outcome = defense::defend_and_recognize(image, pipeline);

  const fs::path mask_out = overrides.out_path.empty() ? dir / "predicted_mask.pgm"
                                                       : fs::path(overrides.out_path);
  core::write_mask_pgm(mask_out, outcome.mask);
  json report;
  report["masked_pixels"] = outcome.mask.ones_count();
  if (outcome.probs.size()) {
    Eigen::Index arg = 0;
    outcome.probs.maxCoeff(&arg);
    report["predicted_label"] = static_cast<int>(arg);
    report["confidence"] = outcome.probs(arg);
  }
  std::ofstream(dir / "report.json") << report.dump(2) << "\n";
  std::cout << "defend: " << report.dump() << "\n";
  write_manifest(dir, "defend", config, {fr_path, seg_path}, {mask_out.filename().string(), "report.json"});
}

evalkit::ExperimentGrid grid_from_config(const RunConfig& config) {
  evalkit::ExperimentGrid grid;
  grid.seed = core::derive_seed(config.seed, 0xe7);
  grid.images_per_cell = config.evaluate.images_per_cell;
  for (const auto& d : config.evaluate.defenses) {
    evalkit::DefenseCfg dc;
    dc.fill = config.defend.fill;
    dc.saf_n = config.evaluate.saf_n;
    if (d == "undefended") dc.kind = evalkit::DefenseKind::undefended;
    else if (d == "gt") dc.kind = evalkit::DefenseKind::gt;
    else if (d == "ours-") dc.kind = evalkit::DefenseKind::ours_minus;
    else dc.kind = evalkit::DefenseKind::ours_plus;
    grid.defenses.push_back(dc);
  }
  for (int n : config.evaluate.saf_sweep) {
    evalkit::DefenseCfg dc;
    dc.kind = evalkit::DefenseKind::ours_plus;
    dc.saf_n = n;
    dc.fill = config.defend.fill;
    grid.defenses.push_back(dc);
  }
  for (const auto& m : config.evaluate.masks) {
    evalkit::MaskSpecCfg mc;
    mc.fmask_delta = config.evaluate.fmask_delta;
    mc.fmask_area_min = config.evaluate.fmask_area_min;
    mc.fmask_area_max = config.evaluate.fmask_area_max;
    if (m == "glasses") mc.kind = evalkit::MaskKind::glasses;
    else if (m == "sticker") mc.kind = evalkit::MaskKind::sticker;
    else if (m == "respirator") mc.kind = evalkit::MaskKind::respirator;
    else if (m == "rmask") mc.kind = evalkit::MaskKind::rmask;
    else mc.kind = evalkit::MaskKind::fmask;
    grid.masks.push_back(mc);
  }
  for (const auto& a : config.evaluate.attacks) {
    evalkit::AttackCfg ac;
    ac.alpha = config.evaluate.alpha;
    ac.epsilon = config.evaluate.epsilon;
    ac.steps = config.evaluate.steps;
    ac.sigmoid_temperature = config.evaluate.sigmoid_temperature;
    if (a == "clean") ac.kind = evalkit::AttackKind::clean;
    else if (a == "bpda") ac.kind = evalkit::AttackKind::bpda;
    else {
      ac.kind = evalkit::AttackKind::pgd;
      if (a == "pgd-impersonation") ac.goal = attack::Goal::impersonation;
    }
    grid.attacks.push_back(ac);
  }
  return grid;
}

void stage_evaluate(const RunConfig& config, const StageOverrides& overrides) {
  const fs::path dir = overrides.out_path.empty() ? stage_dir(config, "evaluate")
                                                  : fs::path(overrides.out_path);
  fs::create_directories(dir);
  const fs::path fr_path = overrides.fr_path.empty()
                               ? require_artifact(artifact_root(config) / "train-fr" / "model.ckpt",
                                                  "run `radap train-fr` first")
                               : fs::path(overrides.fr_path);
  const models::RecognitionModel fr = models::load_checkpoint(fr_path);

  const bool needs_seg =
      std::any_of(config.evaluate.defenses.begin(), config.evaluate.defenses.end(),
                  [](const std::string& d) { return d == "ours-" || d == "ours+"; }) ||
      !config.evaluate.saf_sweep.empty();
  segmenter::PatchSegmenter seg;
  std::vector<fs::path> inputs{fr_path};
  if (needs_seg) {
    const fs::path seg_path =
        overrides.segmenter_path.empty()
            ? require_artifact(artifact_root(config) / "train-segmenter" / "segmenter.ckpt",
                               "run `radap train-segmenter` first")
            : fs::path(overrides.segmenter_path);
    seg = segmenter::load_checkpoint(seg_path);
    inputs.push_back(seg_path);
  }

  const data::Dataset full = load_dataset(config);
  const auto split = data::split_per_identity(full, full.num_classes, config.dataset.train_fraction);

  evalkit::GridContext ctx;
  ctx.fr = &fr;
  ctx.seg = needs_seg ? &seg : nullptr;
  ctx.testset = &split.test;
  ctx.threads = overrides.threads;

  const auto report = evalkit::run_grid(grid_from_config(config), ctx, dir);
  std::cout << "evaluate: " << report.cells.size() << " cells -> " << (dir / "summary.txt")
            << "\n";
  write_manifest(dir, "evaluate", config, inputs, {"report.jsonl", "summary.txt", "cells"});
}

void stage_plot(const RunConfig& config, const StageOverrides& overrides) {
  const fs::path report_dir = overrides.image_path.empty() ? artifact_root(config) / "evaluate"
                                                           : fs::path(overrides.image_path);
  require_artifact(report_dir / "report.jsonl", "run `radap evaluate` first");
  evalkit::EvaluationReport report;
  std::ifstream in(report_dir / "report.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    evalkit::CellResult c;
    c.defense = j.at("defense").get<std::string>();
    c.mask = j.at("mask").get<std::string>();
    c.attack = j.at("attack").get<std::string>();
    c.metric = j.at("metric").get<double>();
    c.count = j.at("count").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.cell_index = j.at("cell_index").get<int>();
    report.cells.push_back(std::move(c));
  }
  const fs::path dir = overrides.out_path.empty() ? stage_dir(config, "plot")
                                                  : fs::path(overrides.out_path);
  fs::create_directories(dir);
  const auto written = evalkit::emit_plots(report, dir);
  std::cout << "plot: wrote " << written.size() << " files\n";
  std::vector<std::string> outputs;
  for (const auto& p : written) outputs.push_back(p.filename().string());
  write_manifest(dir, "plot", config, {report_dir / "report.jsonl"}, outputs);
}

}  // namespace

Stage stage_from_name(const std::string& name) {
  if (name == "mask") return Stage::mask;
  if (name == "train-fr") return Stage::train_fr;
  if (name == "gen-fpatch") return Stage::gen_fpatch;
  if (name == "train-segmenter") return Stage::train_segmenter;
  if (name == "attack") return Stage::attack;
  if (name == "defend") return Stage::defend;
  if (name == "evaluate") return Stage::evaluate;
  if (name == "plot") return Stage::plot;
  throw ValidationError("unknown stage: " + name);
}

void run_stage(Stage stage, const RunConfig& config, const StageOverrides& overrides) {
  switch (stage) {
    case Stage::mask:
      return stage_mask(config, overrides);
    case Stage::train_fr:
      return stage_train_fr(config, overrides);
    case Stage::gen_fpatch:
      return stage_gen_fpatch(config, overrides);
    case Stage::train_segmenter:
      return stage_train_segmenter(config, overrides);
    case Stage::attack:
      return stage_attack(config, overrides);
    case Stage::defend:
      return stage_defend(config, overrides);
    case Stage::evaluate:
      return stage_evaluate(config, overrides);
    case Stage::plot:
      return stage_plot(config, overrides);
  }
  throw Error("unreachable stage");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const ParameterError*>(&e))
    return 2;
  if (dynamic_cast<const DependencyError*>(&e)) return 3;
  return 4;
}

}  // namespace radap::cli
