#include <doctest.h>

#include "radap/augment/augment.hpp"
#include "radap/core/rng.hpp"

using namespace radap;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
  core::Rng rng(seed);
  Image img(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(c, y, x) = rng.uniform();
  return img;
}

bool identical(const Image& a, const Image& b) { return a.max_abs_diff(b) == 0.0; }

}  // namespace

TEST_CASE("apply_occlusion basics") {
  const Image img = random_image(8, 8, 1);

  BinaryMask zeros;
  zeros.values = IntField::Zero(8, 8);
  CHECK(identical(augment::apply_occlusion(img, zeros, 0.0), img));

  BinaryMask ones;
  ones.values = IntField::Constant(8, 8, 1);
  const Image blanked = augment::apply_occlusion(img, ones, 0.0);
  for (int c = 0; c < 3; ++c) CHECK((blanked.ch[static_cast<std::size_t>(c)] == 0.0).all());

  BinaryMask single;
  single.values = IntField::Zero(8, 8);
  single.values(2, 3) = 1;
  const Image poked = augment::apply_occlusion(img, single, 0.0);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        if (y == 2 && x == 3)
          CHECK(poked.at(c, y, x) == 0.0);
        else
          CHECK(poked.at(c, y, x) == img.at(c, y, x));
      }

  BinaryMask wrong;
  wrong.values = IntField::Zero(4, 4);
  CHECK_THROWS_AS(augment::apply_occlusion(img, wrong, 0.0), ShapeError);
}

TEST_CASE("apply_occlusion is idempotent for fixed mask and fill") {
  const Image img = random_image(12, 10, 2);
  core::Rng rng(3);
  const BinaryMask mask = fmask::sample_rmask_default(12, 10, rng);
  const Image once = augment::apply_occlusion(img, mask, 0.25);
  const Image twice = augment::apply_occlusion(once, mask, 0.25);
  CHECK(identical(once, twice));
}

TEST_CASE("augment_batch honors apply_probability and determinism") {
  std::vector<Image> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(random_image(16, 16, 10 + static_cast<std::uint64_t>(i)));

  augment::AugmentPolicy off;
  off.kind = augment::AugmentKind::cutout;
  off.apply_probability = 0.0;
  core::Rng rng(1);
  const auto same = augment::augment_batch(batch, off, rng);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(identical(same[i], batch[i]));

  augment::AugmentPolicy cutout;
  cutout.kind = augment::AugmentKind::cutout;
  cutout.apply_probability = 1.0;
  core::Rng rng2(2);
  const auto cut = augment::augment_batch(batch, cutout, rng2);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK_FALSE(identical(cut[i], batch[i]));

  core::Rng rng3(5), rng4(5);
  augment::AugmentPolicy fco;
  fco.kind = augment::AugmentKind::fcutout;
  const auto a = augment::augment_batch(batch, fco, rng3);
  const auto b = augment::augment_batch(batch, fco, rng4);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(identical(a[i], b[i]));
}

TEST_CASE("augment policy validation") {
  augment::AugmentPolicy bad;
  bad.kind = augment::AugmentKind::cutout;
  bad.apply_probability = 1.5;
  std::vector<Image> batch{random_image(8, 8, 1)};
  core::Rng rng(1);
  CHECK_THROWS_AS(augment::augment_batch(batch, bad, rng), ConfigError);
}
