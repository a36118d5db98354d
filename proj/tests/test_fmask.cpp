#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "radap/core/fft.hpp"
#include "radap/fmask/fmask.hpp"
#include "radap/segmenter/segmenter.hpp"

using namespace radap;

namespace {

fmask::FMaskConfig make_config(int h, int w, double delta = 3.0, double a = 0.0, double b = 1.0) {
  fmask::FMaskConfig c;
  c.height = h;
  c.width = w;
  c.decay_power = delta;
  c.area_min = a;
  c.area_max = b;
  return c;
}

// sort-based oracle: number of entries strictly above the k-th largest
long threshold_oracle(const Field& g, double lambda) {
  std::vector<double> vals(g.data(), g.data() + g.size());
  const long k = std::lround(lambda * static_cast<double>(vals.size()));
  if (k == 0) return 0;
  std::sort(vals.begin(), vals.end(), std::greater<double>());
  const double kth = vals[static_cast<std::size_t>(k - 1)];
  return std::count_if(vals.begin(), vals.end(), [&](double v) { return v > kth; });
}

}  // namespace

TEST_CASE("sample_spectrum determinism, normal statistics, bad dims") {
  core::Rng rng1(5), rng2(5);
  const auto cfg = make_config(4, 4);
  const auto z1 = fmask::sample_spectrum(cfg, rng1);
  const auto z2 = fmask::sample_spectrum(cfg, rng2);
  CHECK(z1.real_part.rows() == 4);
  CHECK((z1.real_part == z2.real_part).all());
  CHECK((z1.imag_part == z2.imag_part).all());

  // law of large numbers over repeated 4x4 draws
  core::Rng rng(99);
  double sum = 0.0;
  long count = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto z = fmask::sample_spectrum(cfg, rng);
    sum += z.real_part.sum();
    count += z.real_part.size();
  }
  CHECK(std::abs(sum / static_cast<double>(count)) < 0.02);

  CHECK_THROWS_AS(fmask::sample_spectrum(make_config(0, 4), rng), ConfigError);
}

TEST_CASE("low_pass_filter: identity at delta 0, hand-computed Nyquist bin, monotone in delta") {
  core::Rng rng(3);
  const auto z = fmask::sample_spectrum(make_config(8, 8), rng);

  const auto same = fmask::low_pass_filter(z, 0.0);
  CHECK((same.real_part == z.real_part).all());
  CHECK((same.imag_part == z.imag_part).all());

  // fftfreq(8) puts -0.5 at index 4; the radial frequency at (4,4) is 0.5*sqrt(2)
  const Field grid = fmask::radial_freq_grid(8, 8);
  CHECK(grid(4, 4) == doctest::Approx(0.5 * std::sqrt(2.0)).epsilon(1e-15));
  const auto f1 = fmask::low_pass_filter(z, 1.0);
  CHECK(f1.real_part(4, 4) == doctest::Approx(z.real_part(4, 4) / (0.5 * std::sqrt(2.0))));
  CHECK(f1.imag_part(4, 4) == doctest::Approx(z.imag_part(4, 4) / (0.5 * std::sqrt(2.0))));

  // every frequency on this grid is below 1, so a larger decay power
  // strictly inflates every nonzero entry
  const auto f3 = fmask::low_pass_filter(z, 3.0);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      CHECK(grid(i, j) < 1.0);
      if (z.real_part(i, j) != 0.0)
        CHECK(std::abs(f3.real_part(i, j)) > std::abs(f1.real_part(i, j)));
    }
}

TEST_CASE("low_pass_filter clamps the DC bin at 1/max(H,W)") {
  const Field grid = fmask::radial_freq_grid(8, 16);
  CHECK(grid(0, 0) == doctest::Approx(1.0 / 16.0));
  CHECK(grid(0, 1) == doctest::Approx(1.0 / 16.0));  // exactly at the floor
  CHECK(grid(1, 0) == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("spectrum_to_gray recovers a DFT'd image up to normalization") {
  core::Rng rng(17);
  const int h = 16, w = 16;
  Field img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) img(i, j) = rng.uniform();

  core::ComplexField x(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) x(i, j) = {img(i, j), 0.0};
  const auto spec = core::dft2d(x);

  fmask::ComplexSpectrum s;
  s.real_part = spec.real();
  s.imag_part = spec.imag();
  const GrayscaleField gray = fmask::spectrum_to_gray(s);

  const double lo = img.minCoeff(), hi = img.maxCoeff();
  const Field expected = (img - lo) / (hi - lo);
  CHECK((gray.values - expected).abs().maxCoeff() < 1e-6);
  CHECK(gray.values.minCoeff() == doctest::Approx(0.0));
  CHECK(gray.values.maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("spectrum_to_gray degenerate constant field") {
  fmask::ComplexSpectrum zero;
  zero.real_part = Field::Zero(6, 6);
  zero.imag_part = Field::Zero(6, 6);
  const GrayscaleField gray = fmask::spectrum_to_gray(zero);
  CHECK((gray.values == 0.0).all());
}

TEST_CASE("threshold_mask: k-rule, zeros, constants, bad lambda") {
  core::Rng rng(23);
  GrayscaleField g;
  g.values = Field(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g.values(i, j) = rng.uniform();

  CHECK(fmask::threshold_mask(g, 0.0).ones_count() == 0);
  // distinct values, lambda = 0.5 -> k = 8 -> exactly 7 ones
  const auto m = fmask::threshold_mask(g, 0.5);
  CHECK(m.ones_count() == 7);
  CHECK(m.ones_count() == threshold_oracle(g.values, 0.5));

  GrayscaleField flat;
  flat.values = Field::Constant(4, 4, 0.25);
  CHECK(fmask::threshold_mask(flat, 0.5).ones_count() == 0);

  CHECK_THROWS_AS(fmask::threshold_mask(g, -0.1), ParameterError);
  CHECK_THROWS_AS(fmask::threshold_mask(g, 1.0001), ParameterError);
}

TEST_CASE("threshold_mask area law property against the sort oracle") {
  core::Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const int h = rng.uniform_int(2, 17);
    const int w = rng.uniform_int(2, 17);
    GrayscaleField g;
    g.values = Field(h, w);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) g.values(i, j) = rng.uniform();
    const double lambda = rng.uniform();
    const auto mask = fmask::threshold_mask(g, lambda);
    CHECK(mask.ones_count() == threshold_oracle(g.values, lambda));
    const long k = std::lround(lambda * h * w);
    if (k > 0) CHECK(mask.ones_count() == k - 1);
  }
}

TEST_CASE("sample_fmask: determinism, area bound, mean area") {
  const auto cfg = make_config(32, 32, 3.0, 0.02, 0.30);
  core::Rng rng1(77), rng2(77);
  const auto m1 = fmask::sample_fmask(cfg, rng1);
  const auto m2 = fmask::sample_fmask(cfg, rng2);
  CHECK((m1.values == m2.values).all());
  CHECK(m1.origin == MaskOrigin::fmask);

  core::Rng rng(123);
  const double hw = 32.0 * 32.0;
  for (int i = 0; i < 100; ++i) {
    const auto m = fmask::sample_fmask(cfg, rng);
    const double frac = static_cast<double>(m.ones_count()) / hw;
    CHECK(frac >= 0.02 - 2.0 / hw);
    CHECK(frac <= 0.30);
  }

  const auto wide = make_config(32, 32, 3.0, 0.0, 1.0);
  core::Rng rng3(5);
  double total = 0.0;
  for (int i = 0; i < 1000; ++i)
    total += static_cast<double>(fmask::sample_fmask(wide, rng3).ones_count()) / hw;
  CHECK(total / 1000.0 == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +/- 0.02
}

TEST_CASE("larger decay power gives smoother masks (paired Sobel test)") {
  const int n = 200;
  double diff_sum = 0.0, diff_sq = 0.0;
  core::Rng rng(2024);
  for (int i = 0; i < n; ++i) {
    const auto cfg = make_config(32, 32);
    const auto z = fmask::sample_spectrum(cfg, rng);
    const double lambda = rng.uniform(0.1, 0.5);
    const auto m1 = fmask::threshold_mask(fmask::spectrum_to_gray(fmask::low_pass_filter(z, 1.0)), lambda);
    const auto m3 = fmask::threshold_mask(fmask::spectrum_to_gray(fmask::low_pass_filter(z, 3.0)), lambda);
    const double s1 = segmenter::sobel_gradient_magnitude(m1).mean();
    const double s3 = segmenter::sobel_gradient_magnitude(m3).mean();
    const double d = s3 - s1;
    diff_sum += d;
    diff_sq += d * d;
  }
  const double mean = diff_sum / n;
  const double var = (diff_sq - n * mean * mean) / (n - 1);
  const double t = mean / std::sqrt(var / n);
  // one-sided paired t-test at p < 0.01, df = 199
  CHECK(t < -2.345);
}

TEST_CASE("sample_rmask: exact areas, zero count, impossible placement") {
  core::Rng rng(9);
  // lround(0.375 * 8) = 3 on both sides -> exactly one 3x3 rectangle
  const auto m = fmask::sample_rmask(8, 8, 1, {0.375, 0.375}, rng);
  CHECK(m.ones_count() == 9);
  CHECK(m.origin == MaskOrigin::rmask);

  CHECK(fmask::sample_rmask(8, 8, 0, {0.1, 0.4}, rng).ones_count() == 0);

  // union semantics: with 2x2 rectangles the union has 4..8 ones and a
  // disjoint draw reaching exactly 8 exists
  bool found_disjoint = false;
  for (int seed = 0; seed < 50 && !found_disjoint; ++seed) {
    core::Rng r(static_cast<std::uint64_t>(seed));
    const auto two = fmask::sample_rmask(8, 8, 2, {0.25, 0.25}, r);
    CHECK(two.ones_count() >= 4);
    CHECK(two.ones_count() <= 8);
    if (two.ones_count() == 8) found_disjoint = true;
  }
  CHECK(found_disjoint);

  CHECK_THROWS_AS(fmask::sample_rmask(8, 8, 1, {1.5, 2.0}, rng), ParameterError);
}

TEST_CASE("predefined masks load, scale, and reject unknown names") {
  const auto sticker = fmask::load_predefined_mask("sticker", 112, 112);
  CHECK(sticker.height() == 112);
  CHECK(sticker.width() == 112);
  CHECK(sticker.ones_count() > 0);
  CHECK(sticker.origin == MaskOrigin::predefined);

  const auto again = fmask::load_predefined_mask("sticker", 112, 112);
  CHECK((sticker.values == again.values).all());

  CHECK_THROWS_AS(fmask::load_predefined_mask("hat", 64, 64), CatalogError);

  for (const char* name : {"glasses", "respirator"}) {
    const auto m = fmask::load_predefined_mask(name, 32, 32);
    CHECK(m.ones_count() > 0);
    CHECK(m.ones_count() < 32 * 32);
  }
}
