#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "radap/core/errors.hpp"
#include "radap/core/field.hpp"
#include "radap/core/rng.hpp"

namespace radap::fmask {

// H x W complex field with i.i.d. standard-normal real and imaginary parts.
struct ComplexSpectrum {
  Field real_part;
  Field imag_part;

  int height() const { return static_cast<int>(real_part.rows()); }
  int width() const { return static_cast<int>(real_part.cols()); }
};

struct FMaskConfig {
  int height = 0;
  int width = 0;
  double decay_power = 3.0;  // delta; larger -> smoother masks
  double area_min = 0.0;     // a
  double area_max = 1.0;     // b, lambda ~ U(a, b)
  std::uint64_t seed = 0;

  void validate() const {
    if (height <= 0 || width <= 0)
      throw ConfigError("fmask: height and width must be positive");
    if (!(decay_power > 0.0)) throw ConfigError("fmask: decay_power must be > 0");
    if (!(area_min >= 0.0 && area_min < area_max && area_max <= 1.0))
      throw ConfigError("fmask: area range must satisfy 0 <= a < b <= 1");
  }
};

// Radial magnitude of the DFT sample frequency grid, clamped from below at
// 1/max(H, W) so the DC bin stays finite under the decay-power division.
Field radial_freq_grid(int height, int width);

ComplexSpectrum sample_spectrum(const FMaskConfig& config, core::Rng& rng);

// Entry-wise division by freq^delta. delta = 0 is the identity and is only
// meaningful for tests; production configs require delta > 0.
ComplexSpectrum low_pass_filter(const ComplexSpectrum& spectrum, double delta);

// Inverse DFT, real part, then min-max normalization to [0, 1]. A constant
// field after the inverse transform maps to all zeros.
GrayscaleField spectrum_to_gray(const ComplexSpectrum& spectrum);

// M_ij = 1 iff G_ij strictly exceeds the k-th largest value of G where
// k = round(lambda * H * W); k = 0 gives the all-zeros mask.
BinaryMask threshold_mask(const GrayscaleField& gray, double lambda);

struct FMaskDraw {
  BinaryMask mask;
  double lambda = 0.0;
};

FMaskDraw sample_fmask_detailed(const FMaskConfig& config, core::Rng& rng);
BinaryMask sample_fmask(const FMaskConfig& config, core::Rng& rng);

// Union of axis-aligned rectangles. Side lengths are drawn uniformly from
// size_range (fractions of min(H, W)); placement is uniform over positions
// where the rectangle fits.
BinaryMask sample_rmask(int height, int width, int rect_count,
                        std::pair<double, double> size_range, core::Rng& rng);

// rect_count ~ U{1,2,3}, sides uniform in [0.1, 0.4] * min(H, W).
BinaryMask sample_rmask_default(int height, int width, core::Rng& rng);

enum class PredefinedMask { glasses, sticker, respirator };

PredefinedMask predefined_mask_from_name(const std::string& name);

// Stored stencil scaled to H x W by nearest neighbor. stencil_dir falls back
// to the RADAP_STENCIL_DIR environment variable, then the checked-in assets.
BinaryMask load_predefined_mask(PredefinedMask kind, int height, int width,
                                const std::filesystem::path& stencil_dir = {});
BinaryMask load_predefined_mask(const std::string& name, int height, int width,
                                const std::filesystem::path& stencil_dir = {});

// Nearest-neighbor rescale, shared by the stencil loader and mask file I/O.
BinaryMask resize_nearest(const BinaryMask& mask, int height, int width);

}  // namespace radap::fmask
