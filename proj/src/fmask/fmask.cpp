#include "radap/fmask/fmask.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "radap/core/fft.hpp"
#include "radap/core/pnm.hpp"

namespace radap::fmask {

Field radial_freq_grid(int height, int width) {
  if (height <= 0 || width <= 0) throw ConfigError("radial_freq_grid: dimensions must be positive");
  const Eigen::ArrayXd fr = core::fft_frequencies(height);
  const Eigen::ArrayXd fc = core::fft_frequencies(width);
  const double floor_freq = 1.0 / static_cast<double>(std::max(height, width));
  Field grid(height, width);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j)
      grid(i, j) = std::max(std::hypot(fr(i), fc(j)), floor_freq);
  return grid;
}

ComplexSpectrum sample_spectrum(const FMaskConfig& config, core::Rng& rng) {
  config.validate();
  ComplexSpectrum z;
  z.real_part = Field(config.height, config.width);
  z.imag_part = Field(config.height, config.width);
  for (int i = 0; i < config.height; ++i) {
    for (int j = 0; j < config.width; ++j) {
      z.real_part(i, j) = rng.normal();
      z.imag_part(i, j) = rng.normal();
    }
  }
  return z;
}

ComplexSpectrum low_pass_filter(const ComplexSpectrum& spectrum, double delta) {
  if (delta < 0.0) throw ParameterError("low_pass_filter: delta must be >= 0");
  const Field scale = radial_freq_grid(spectrum.height(), spectrum.width()).pow(delta);
  ComplexSpectrum out;
  out.real_part = spectrum.real_part / scale;
  out.imag_part = spectrum.imag_part / scale;
  return out;
}

GrayscaleField spectrum_to_gray(const ComplexSpectrum& spectrum) {
  const int h = spectrum.height();
  const int w = spectrum.width();
  core::ComplexField z(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      z(i, j) = std::complex<double>(spectrum.real_part(i, j), spectrum.imag_part(i, j));
  const Field real = core::idft2d(z).real();
  const double lo = real.minCoeff();
  const double hi = real.maxCoeff();
  GrayscaleField gray;
  if (hi - lo <= 0.0) {
    gray.values = Field::Zero(h, w);  // degenerate constant field
  } else {
    gray.values = (real - lo) / (hi - lo);
  }
  return gray;
}

BinaryMask threshold_mask(const GrayscaleField& gray, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ParameterError("threshold_mask: lambda must lie in [0, 1]");
  const int h = gray.height();
  const int w = gray.width();
  const long total = static_cast<long>(h) * w;
  const long k = std::lround(lambda * static_cast<double>(total));

  BinaryMask mask;
  mask.origin = MaskOrigin::fmask;
  if (k == 0) {
    mask.values = IntField::Zero(h, w);
    return mask;
  }
  std::vector<double> vals(gray.values.data(), gray.values.data() + total);
  std::nth_element(vals.begin(), vals.begin() + (k - 1), vals.end(), std::greater<double>());
  const double kth_largest = vals[static_cast<std::size_t>(k - 1)];
  mask.values = (gray.values > kth_largest).cast<int>();
  return mask;
}

FMaskDraw sample_fmask_detailed(const FMaskConfig& config, core::Rng& rng) {
  config.validate();
  const ComplexSpectrum z = sample_spectrum(config, rng);
  const GrayscaleField gray = spectrum_to_gray(low_pass_filter(z, config.decay_power));
  FMaskDraw draw;
  draw.lambda = rng.uniform(config.area_min, config.area_max);
  draw.mask = threshold_mask(gray, draw.lambda);
  return draw;
}

BinaryMask sample_fmask(const FMaskConfig& config, core::Rng& rng) {
  return sample_fmask_detailed(config, rng).mask;
}

BinaryMask sample_rmask(int height, int width, int rect_count,
                        std::pair<double, double> size_range, core::Rng& rng) {
  if (height <= 0 || width <= 0) throw ParameterError("sample_rmask: dimensions must be positive");
  if (rect_count < 0) throw ParameterError("sample_rmask: rect_count must be >= 0");
  const auto [lo, hi] = size_range;
  if (!(lo >= 0.0 && lo <= hi && hi <= 1.0))
    throw ParameterError("sample_rmask: size_range must satisfy 0 <= lo <= hi <= 1");

  const int base = std::min(height, width);
  BinaryMask mask;
  mask.values = IntField::Zero(height, width);
  mask.origin = MaskOrigin::rmask;
  for (int r = 0; r < rect_count; ++r) {
    const int rh = std::max(1, static_cast<int>(std::lround(rng.uniform(lo, hi) * base)));
    const int rw = std::max(1, static_cast<int>(std::lround(rng.uniform(lo, hi) * base)));
    if (rh > height || rw > width)
      throw ParameterError("sample_rmask: rectangle does not fit within the image");
    const int y0 = rng.uniform_int(0, height - rh);
    const int x0 = rng.uniform_int(0, width - rw);
    mask.values.block(y0, x0, rh, rw).setConstant(1);
  }
  return mask;
}

BinaryMask sample_rmask_default(int height, int width, core::Rng& rng) {
  const int count = rng.uniform_int(1, 3);
  return sample_rmask(height, width, count, {0.1, 0.4}, rng);
}

PredefinedMask predefined_mask_from_name(const std::string& name) {
  if (name == "glasses") return PredefinedMask::glasses;
  if (name == "sticker") return PredefinedMask::sticker;
  if (name == "respirator") return PredefinedMask::respirator;
  throw CatalogError("unknown predefined mask: " + name);
}

namespace {

const char* stencil_file(PredefinedMask kind) {
  switch (kind) {
    case PredefinedMask::glasses:
      return "glasses.pgm";
    case PredefinedMask::sticker:
      return "sticker.pgm";
    case PredefinedMask::respirator:
      return "respirator.pgm";
  }
  throw CatalogError("unknown predefined mask kind");
}

std::filesystem::path resolve_stencil_dir(const std::filesystem::path& requested) {
  if (!requested.empty()) return requested;
  if (const char* env = std::getenv("RADAP_STENCIL_DIR")) return env;
#ifdef RADAP_STENCIL_DIR
  return RADAP_STENCIL_DIR;
#else
  return "assets/stencils";
#endif
}

}  // namespace

BinaryMask resize_nearest(const BinaryMask& mask, int height, int width) {
  if (height <= 0 || width <= 0) throw ParameterError("resize_nearest: dimensions must be positive");
  const int sh = mask.height();
  const int sw = mask.width();
  BinaryMask out;
  out.values = IntField(height, width);
  out.origin = mask.origin;
  for (int y = 0; y < height; ++y) {
    int sy = static_cast<int>((static_cast<long>(y) * sh) / height);
    for (int x = 0; x < width; ++x) {
      int sx = static_cast<int>((static_cast<long>(x) * sw) / width);
      out.values(y, x) = mask.values(sy, sx);
    }
  }
  return out;
}

BinaryMask load_predefined_mask(PredefinedMask kind, int height, int width,
                                const std::filesystem::path& stencil_dir) {
  const auto dir = resolve_stencil_dir(stencil_dir);
  const auto path = dir / stencil_file(kind);
  if (!std::filesystem::exists(path))
    throw CatalogError("stencil file missing: " + path.string());
  BinaryMask stencil = core::read_mask_pgm(path, MaskOrigin::predefined);
  return resize_nearest(stencil, height, width);
}

BinaryMask load_predefined_mask(const std::string& name, int height, int width,
                                const std::filesystem::path& stencil_dir) {
  return load_predefined_mask(predefined_mask_from_name(name), height, width, stencil_dir);
}

}  // namespace radap::fmask
