#include "radap/augment/augment.hpp"

namespace radap::augment {

Image apply_occlusion(const Image& image, const BinaryMask& mask, double fill) {
  if (image.height() != mask.height() || image.width() != mask.width())
    throw ShapeError("apply_occlusion: image and mask shapes disagree");
  Image out = image;
  const int h = image.height();
  const int w = image.width();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.values(y, x) != 0)
        for (int c = 0; c < 3; ++c) out.at(c, y, x) = fill;
  return out;
}

Image augment_one(const Image& image, const AugmentPolicy& policy, core::Rng& rng) {
  if (policy.kind == AugmentKind::none) return image;
  if (rng.uniform() >= policy.apply_probability) return image;
  BinaryMask mask;
  if (policy.kind == AugmentKind::fcutout) {
    fmask::FMaskConfig cfg = policy.fmask_config;
    cfg.height = image.height();
    cfg.width = image.width();
    mask = fmask::sample_fmask(cfg, rng);
  } else {
    const int count = rng.uniform_int(policy.rmask_count_min, policy.rmask_count_max);
    mask = fmask::sample_rmask(image.height(), image.width(), count, policy.rmask_size_range, rng);
  }
  return apply_occlusion(image, mask, policy.fill_value);
}

std::vector<Image> augment_batch(const std::vector<Image>& batch, const AugmentPolicy& policy,
                                 core::Rng& rng) {
  policy.validate();
  std::vector<Image> out;
  out.reserve(batch.size());
  for (const Image& image : batch) out.push_back(augment_one(image, policy, rng));
  return out;
}

}  // namespace radap::augment
