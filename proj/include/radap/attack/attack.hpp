#pragma once

#include <filesystem>
#include <optional>

#include "radap/data/toyfaces.hpp"
#include "radap/defense/defense.hpp"
#include "radap/fmask/fmask.hpp"

namespace radap::attack {

enum class Goal { evasion, impersonation };

struct AttackSpec {
  models::Mode system = models::Mode::closed_set;
  Goal goal = Goal::evasion;
  BinaryMask mask;
  double alpha = 0.007;   // perturbation step size
  int steps = 100;        // T
  double epsilon = 0.3;   // L-infinity bound around the source image
  Image source;
  std::optional<Image> target;  // impersonation, open-set
  int label_source = -1;        // closed-set
  int label_target = -1;        // impersonation, closed-set
  bool adaptive = false;
  double sigmoid_temperature = 10.0;  // BPDA surrogate sharpness
  // Reproduces the published open-set objective signs verbatim; the default
  // follows the described attack semantics (evasion lowers same-identity
  // similarity, impersonation raises target similarity).
  bool paper_literal_sign = false;

  void validate() const;
};

struct AttackTrace {
  double objective_start = 0.0;
  double objective_end = 0.0;
};

// Masked PGD ascent on the goal's objective. Pixels where the mask is 0 stay
// bit-identical to the source at every iterate; the projection clamps to
// [0,1] and the epsilon ball. With a defense pipeline supplied and
// spec.adaptive set, the forward pass runs the true defended pipeline while
// the backward pass substitutes a sigmoid for the binarization and the
// identity for SAF (BPDA).
Image pgd_patch_attack(const AttackSpec& spec, const models::RecognitionModel& target_model,
                       const defense::DefensePipeline* defense = nullptr,
                       AttackTrace* trace = nullptr);

Image bpda_adaptive_attack(const AttackSpec& spec, const defense::DefensePipeline& defense,
                           AttackTrace* trace = nullptr);

// sigma(temperature * (p - 0.5)) and its derivative; the BPDA stand-in for
// the hard threshold at 0.5.
double sigmoid_surrogate(double p, double temperature);
double sigmoid_surrogate_gradient(double p, double temperature);

struct FPatchSample {
  Image attacked;
  Image source;
  BinaryMask mask;
  int label = -1;
  int steps_drawn = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

struct FPatchConfig {
  fmask::FMaskConfig fmask{};  // area defaults to (0.02, 0.3) at call sites
  double alpha = 0.007;
  double epsilon = 0.3;
  int t_max = 200;  // cap on T ~ U(1, t_max); the full-scale range is 1000
};

// For each sample: draw an F-mask, draw T uniformly from {1..t_max}, run the
// closed-set evasion PGD attack, and emit the pair with its ground-truth mask.
std::vector<FPatchSample> generate_fpatch_dataset(const data::Dataset& clean,
                                                  const models::RecognitionModel& fr_model,
                                                  const FPatchConfig& config, int count,
                                                  core::Rng& rng, int threads = 0);

std::vector<segmenter::SegSample> to_seg_samples(const std::vector<FPatchSample>& samples);

// Paired image/mask files plus a JSON manifest (per-sample seed, T, lambda).
void save_fpatch_dataset(const std::vector<FPatchSample>& samples,
                         const std::filesystem::path& dir);
std::vector<FPatchSample> load_fpatch_dataset(const std::filesystem::path& dir);

}  // namespace radap::attack
