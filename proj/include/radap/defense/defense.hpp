#pragma once

#include <optional>

#include "radap/models/models.hpp"
#include "radap/segmenter/segmenter.hpp"

namespace radap::defense {

struct SafConfig {
  int subgrid_count = 8;  // n; threshold tau = subgrid side length (derived)
  // Experimental override of the derived tau; never set by the standard
  // pipeline.
  std::optional<long> tau_override;

  void validate(int mask_side) const {
    if (subgrid_count < 1) throw ConfigError("saf: subgrid_count must be >= 1");
    if (subgrid_count > mask_side)
      throw ConfigError("saf: subgrid_count exceeds the mask side length");
  }
};

// Split and Fill: partition the square mask into n x n subgrids of side
// g = floor(H/n); a subgrid becomes all ones iff its sum strictly exceeds
// tau = g. Remainder rows/columns beyond n*g are zeroed.
BinaryMask saf(const BinaryMask& mask, int subgrid_count,
               std::optional<long> tau_override = std::nullopt);

// Zero-pads a mask to square before SAF and crops back after, preserving the
// algorithm's square-input contract for non-square pipelines.
BinaryMask saf_padded(const BinaryMask& mask, int subgrid_count);

struct DefensePipeline {
  const segmenter::PatchSegmenter* segmenter = nullptr;
  const models::RecognitionModel* fr_model = nullptr;
  std::optional<SafConfig> saf;
  double fill_value = 0.0;

  void validate() const {
    if (segmenter == nullptr || fr_model == nullptr)
      throw ConfigError("defense pipeline: segmenter and fr_model are required");
    if (segmenter->input_height() != fr_model->input_height() ||
        segmenter->input_width() != fr_model->input_width())
      throw ConfigError("defense pipeline: component input sizes disagree");
  }
};

struct DefenseOutcome {
  BinaryMask mask;               // final mask after optional SAF
  Image defended_input;          // occluded image fed to the FR model
  Eigen::VectorXd probs;         // closed-set
  Eigen::VectorXd embedding;     // open-set
};

// segment -> binarize -> optional SAF -> occlude -> recognize.
DefenseOutcome defend_and_recognize(const Image& image, const DefensePipeline& pipeline);

// Ground-truth-mask defense mode; the oracle upper bound for segmenter quality.
DefenseOutcome defend_with_ground_truth(const Image& image, const BinaryMask& true_mask,
                                        const models::RecognitionModel& fr_model, double fill);

}  // namespace radap::defense
