#pragma once

#include <vector>

#include "radap/core/image.hpp"
#include "radap/core/rng.hpp"
#include "radap/fmask/fmask.hpp"

namespace radap::augment {

enum class AugmentKind { none, cutout, fcutout };

struct AugmentPolicy {
  AugmentKind kind = AugmentKind::none;
  // FCutout draws lambda from (0, 1) unless configured otherwise.
  fmask::FMaskConfig fmask_config{};
  // Cutout uses the R-mask defaults: 1-3 rectangles, sides in [0.1, 0.4]*min(H,W).
  int rmask_count_min = 1;
  int rmask_count_max = 3;
  std::pair<double, double> rmask_size_range{0.1, 0.4};
  double fill_value = 0.0;
  double apply_probability = 1.0;

  void validate() const {
    if (!(apply_probability >= 0.0 && apply_probability <= 1.0))
      throw ConfigError("augment: apply_probability must lie in [0, 1]");
    if (!(fill_value >= 0.0 && fill_value <= 1.0))
      throw ConfigError("augment: fill_value must lie in [0, 1]");
    if (kind == AugmentKind::fcutout) {
      // height and width come from each image at apply time
      fmask::FMaskConfig sized = fmask_config;
      sized.height = std::max(sized.height, 1);
      sized.width = std::max(sized.width, 1);
      sized.validate();
    }
  }
};

// out = image * (1 - M) + fill * M, broadcast over channels. Pixels outside
// the mask are bit-identical to the input.
Image apply_occlusion(const Image& image, const BinaryMask& mask, double fill);

// Each image independently receives a freshly sampled mask with probability
// apply_probability.
std::vector<Image> augment_batch(const std::vector<Image>& batch, const AugmentPolicy& policy,
                                 core::Rng& rng);

// Single-image variant used inside training loops.
Image augment_one(const Image& image, const AugmentPolicy& policy, core::Rng& rng);

}  // namespace radap::augment
