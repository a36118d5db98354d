#include "radap/defense/defense.hpp"

#include "radap/augment/augment.hpp"

namespace radap::defense {

BinaryMask saf(const BinaryMask& mask, int subgrid_count, std::optional<long> tau_override) {
  mask.check_binary();
  const int h = mask.height();
  const int w = mask.width();
  if (h != w) throw ShapeError("saf: mask must be square (use saf_padded upstream)");
  SafConfig cfg;
  cfg.subgrid_count = subgrid_count;
  cfg.validate(h);

  const int g = h / subgrid_count;
  const long tau = tau_override.value_or(static_cast<long>(g));

  BinaryMask out;
  out.values = IntField::Zero(h, w);
  out.origin = MaskOrigin::saf;
  for (int i = 0; i < subgrid_count; ++i) {
    for (int j = 0; j < subgrid_count; ++j) {
      const long sum = static_cast<long>(mask.values.block(i * g, j * g, g, g).sum());
      if (sum > tau) out.values.block(i * g, j * g, g, g).setConstant(1);
    }
  }
  return out;
}

BinaryMask saf_padded(const BinaryMask& mask, int subgrid_count) {
  const int h = mask.height();
  const int w = mask.width();
  if (h == w) return saf(mask, subgrid_count);
  const int side = std::max(h, w);
  BinaryMask square;
  square.values = IntField::Zero(side, side);
  square.origin = mask.origin;
  square.values.block(0, 0, h, w) = mask.values;
  BinaryMask filled = saf(square, subgrid_count);
  BinaryMask out;
  out.values = filled.values.block(0, 0, h, w);
  out.origin = MaskOrigin::saf;
  return out;
}

DefenseOutcome defend_and_recognize(const Image& image, const DefensePipeline& pipeline) {
  pipeline.validate();
  DefenseOutcome outcome;
  outcome.mask = segmenter::predict_mask(*pipeline.segmenter, image);
  if (pipeline.saf) {
    pipeline.saf->validate(std::min(outcome.mask.height(), outcome.mask.width()));
    outcome.mask = saf_padded(outcome.mask, pipeline.saf->subgrid_count);
  }
  outcome.defended_input = augment::apply_occlusion(image, outcome.mask, pipeline.fill_value);
  if (pipeline.fr_model->mode() == models::Mode::closed_set)
    outcome.probs = pipeline.fr_model->predict_probs(outcome.defended_input);
  else
    outcome.embedding = pipeline.fr_model->embed(outcome.defended_input);
  return outcome;
}

DefenseOutcome defend_with_ground_truth(const Image& image, const BinaryMask& true_mask,
                                        const models::RecognitionModel& fr_model, double fill) {
  DefenseOutcome outcome;
  outcome.mask = true_mask;
  outcome.defended_input = augment::apply_occlusion(image, true_mask, fill);
  if (fr_model.mode() == models::Mode::closed_set)
    outcome.probs = fr_model.predict_probs(outcome.defended_input);
  else
    outcome.embedding = fr_model.embed(outcome.defended_input);
  return outcome;
}

}  // namespace radap::defense
