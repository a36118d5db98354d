#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radap/core/errors.hpp"

namespace radap::cli {

struct DatasetConfig {
  std::string kind = "procedural";  // procedural | directory
  std::string path;                 // directory kind only
  int height = 32;
  int width = 32;
  int identities = 16;
  int images_per_identity = 100;
  double train_fraction = 0.8;
};

struct MaskStageConfig {
  std::string kind = "fmask";  // fmask | rmask | glasses | sticker | respirator
  int height = 32;
  int width = 32;
  double delta = 3.0;
  double area_min = 0.02;
  double area_max = 0.30;
  int rects = 1;
  int count = 1;
};

struct TrainFrConfig {
  std::string mode = "closed_set";
  std::string augment = "fcutout";  // none | cutout | fcutout
  // desk-scale defaults; the full-scale recipe (lr 0.1, batch 128) is unstable
  // on toy nets with this little data
  int epochs = 60;
  int batch_size = 16;
  double lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool nesterov = true;
  double fcutout_area_min = 0.0;  // FCutout draws lambda from (0, 1)
  double fcutout_area_max = 1.0;
  double fcutout_delta = 3.0;
  double apply_probability = 1.0;
  double fill = 0.0;
  std::vector<int> widths{12, 24, 48, 64};
};

struct GenFpatchConfig {
  int count = 500;
  double area_min = 0.02;
  double area_max = 0.30;
  double delta = 3.0;
  double alpha = 0.007;
  double epsilon = 0.3;
  int t_max = 200;
};

struct TrainSegConfig {
  int epochs = 30;
  int batch_size = 16;
  double lr = 0.01;  // EBCE edge weights multiply the effective step size
  double beta = 1.0;
  std::vector<int> widths{12, 24, 48};
};

struct AttackStageConfig {
  std::string system = "closed_set";
  std::string goal = "evasion";
  std::string mask = "sticker";
  double alpha = 0.007;
  double epsilon = 0.3;
  int steps = 100;
  bool adaptive = false;
  double sigmoid_temperature = 10.0;
  bool paper_literal_sign = false;
};

struct DefendConfig {
  int saf_n = 8;
  bool use_saf = true;
  double fill = 0.0;
};

struct EvaluateConfig {
  std::vector<std::string> defenses{"undefended", "gt", "ours-", "ours+"};
  std::vector<std::string> masks{"glasses", "sticker", "respirator", "rmask", "fmask"};
  std::vector<std::string> attacks{"clean", "pgd"};
  int images_per_cell = 200;
  std::vector<int> saf_sweep;  // extra ours+ columns, one per n
  int steps = 100;
  double alpha = 0.007;
  double epsilon = 0.3;
  double sigmoid_temperature = 10.0;
  int saf_n = 8;
  double fmask_area_min = 0.02;  // evaluation F-mask family
  double fmask_area_max = 0.30;
  double fmask_delta = 3.0;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string artifact_dir = "artifacts";
  DatasetConfig dataset;
  MaskStageConfig mask;
  TrainFrConfig train_fr;
  GenFpatchConfig gen_fpatch;
  TrainSegConfig train_segmenter;
  AttackStageConfig attack;
  DefendConfig defend;
  EvaluateConfig evaluate;
  nlohmann::json snapshot;  // raw parsed file, embedded in stage manifests
};

// Parses and fully validates; throws ValidationError with the offending keys
// (or a location-annotated message on parse errors).
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_json(const nlohmann::json& j);

// Schema and invariant check without side effects. Returns the problems
// found; empty means valid.
std::vector<std::string> validate_config(const std::filesystem::path& path);

nlohmann::json default_config_json();

}  // namespace radap::cli
