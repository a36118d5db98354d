#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "radap/attack/attack.hpp"

namespace radap::evalkit {

enum class DefenseKind { undefended, gt, ours_minus, ours_plus };
enum class MaskKind { glasses, sticker, respirator, rmask, fmask };
enum class AttackKind { clean, pgd, bpda };

struct MaskSpecCfg {
  MaskKind kind = MaskKind::fmask;
  double fmask_delta = 3.0;
  double fmask_area_min = 0.02;
  double fmask_area_max = 0.30;

  std::string label() const;
};

struct AttackCfg {
  AttackKind kind = AttackKind::pgd;
  attack::Goal goal = attack::Goal::evasion;
  double alpha = 0.007;
  double epsilon = 0.3;
  int steps = 100;
  double sigmoid_temperature = 10.0;

  std::string label() const;
};

struct DefenseCfg {
  DefenseKind kind = DefenseKind::undefended;
  int saf_n = 8;
  double fill = 0.0;

  std::string label() const;
};

struct ExperimentGrid {
  std::vector<DefenseCfg> defenses;
  std::vector<MaskSpecCfg> masks;
  std::vector<AttackCfg> attacks;
  std::uint64_t seed = 1;
  int images_per_cell = 200;

  void validate() const;
};

struct GridContext {
  const models::RecognitionModel* fr = nullptr;
  const segmenter::PatchSegmenter* seg = nullptr;  // required for ours-/ours+
  const data::Dataset* testset = nullptr;
  std::filesystem::path stencil_dir;  // empty -> default stencil resolution
  int threads = 0;
};

struct CellResult {
  int cell_index = -1;
  std::string defense;
  std::string mask;
  std::string attack;
  double metric = 0.0;  // Acc or TAR@FAR, percent
  int count = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

struct EvaluationReport {
  std::vector<CellResult> cells;
  std::uint64_t grid_fingerprint = 0;

  const CellResult* find(const std::string& defense, const std::string& mask,
                         const std::string& attack) const;
};

// Runs every (defense, mask, attack) cell; completed cells are persisted as
// atomic per-cell records under workdir and skipped on rerun.
EvaluationReport run_grid(const ExperimentGrid& grid, const GridContext& context,
                          const std::filesystem::path& workdir);

double closed_set_accuracy(std::span<const int> predictions, std::span<const int> labels);
double closed_set_accuracy(const models::RecognitionModel& model, const data::Dataset& data);

// Calibrates the acceptance threshold on the impostor similarities, then
// returns the genuine-accept percentage.
double open_set_tar_at_far(std::span<const double> genuine_similarities,
                           std::span<const double> impostor_similarities, double far = 0.001);

// Writes per-mask SVG charts (SAF sweep line charts when several ours+ cells
// differ in n, defense bar charts otherwise) plus CSV data sidecars.
// Returns the files written.
std::vector<std::filesystem::path> emit_plots(const EvaluationReport& report,
                                              const std::filesystem::path& dir);

}  // namespace radap::evalkit
