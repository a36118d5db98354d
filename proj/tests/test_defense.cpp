#include <doctest.h>

#include "radap/core/rng.hpp"
#include "radap/defense/defense.hpp"

using namespace radap;

namespace {

// literal transcription of the split-and-fill procedure, kept independent of
// the implementation under test
BinaryMask saf_oracle(const BinaryMask& m, int n) {
  const int h = m.height();
  const int g = h / n;
  const long tau = g;
  BinaryMask out;
  out.values = IntField::Zero(h, h);
  out.origin = MaskOrigin::saf;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      long sum = 0;
      for (int y = i * g; y < (i + 1) * g; ++y)
        for (int x = j * g; x < (j + 1) * g; ++x) sum += m.values(y, x);
      const int fill = sum > tau ? 1 : 0;
      for (int y = i * g; y < (i + 1) * g; ++y)
        for (int x = j * g; x < (j + 1) * g; ++x) out.values(y, x) = fill;
    }
  }
  return out;
}

BinaryMask random_mask(int h, int w, core::Rng& rng, double p = 0.5) {
  BinaryMask m;
  m.values = IntField(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.values(y, x) = rng.uniform() < p ? 1 : 0;
  return m;
}

}  // namespace

TEST_CASE("saf forced arithmetic cases") {
  BinaryMask zeros;
  zeros.values = IntField::Zero(8, 8);
  CHECK(defense::saf(zeros, 2).ones_count() == 0);

  BinaryMask ones;
  ones.values = IntField::Constant(8, 8, 1);
  CHECK(defense::saf(ones, 2).ones_count() == 64);  // each 4x4 sums to 16 > 4

  // exactly 5 ones inside one 4x4 subgrid: 5 > tau = 4 -> filled
  BinaryMask five;
  five.values = IntField::Zero(8, 8);
  five.values(0, 0) = five.values(1, 1) = five.values(2, 2) = five.values(3, 3) = 1;
  five.values(0, 3) = 1;
  const BinaryMask filled = defense::saf(five, 2);
  CHECK(filled.ones_count() == 16);
  CHECK((filled.values.block(0, 0, 4, 4) == 1).all());

  // exactly 4 ones: 4 > 4 is false -> zeroed
  BinaryMask four = five;
  four.values(0, 3) = 0;
  CHECK(defense::saf(four, 2).ones_count() == 0);
}

TEST_CASE("saf exhaustive 4x4 check: oracle equality and idempotence") {
  for (int bits = 0; bits < (1 << 16); ++bits) {
    BinaryMask m;
    m.values = IntField(4, 4);
    for (int p = 0; p < 16; ++p) m.values(p / 4, p % 4) = (bits >> p) & 1;
    const BinaryMask out = defense::saf(m, 2);
    const BinaryMask expected = saf_oracle(m, 2);
    REQUIRE((out.values == expected.values).all());
    const BinaryMask twice = defense::saf(out, 2);
    REQUIRE((twice.values == out.values).all());
  }
}

TEST_CASE("saf matches the oracle on random masks across n") {
  core::Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int side = 8 * rng.uniform_int(1, 4);  // 8..32
    const BinaryMask m = random_mask(side, side, rng, rng.uniform(0.05, 0.8));
    for (int n : {1, 2, 4, 8}) {
      const BinaryMask out = defense::saf(m, n);
      const BinaryMask expected = saf_oracle(m, n);
      REQUIRE((out.values == expected.values).all());
      // idempotence and subgrid constancy
      REQUIRE((defense::saf(out, n).values == out.values).all());
      const int g = side / n;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const auto block = out.values.block(i * g, j * g, g, g);
          REQUIRE((block == block(0, 0)).all());
        }
    }
  }
}

TEST_CASE("saf zeroes remainder rows and columns") {
  core::Rng rng(23);
  const BinaryMask m = random_mask(10, 10, rng, 0.9);  // n=3 -> g=3, remainder 1
  const BinaryMask out = defense::saf(m, 3);
  for (int k = 0; k < 10; ++k) {
    CHECK(out.values(9, k) == 0);
    CHECK(out.values(k, 9) == 0);
  }
}

TEST_CASE("saf monotone coverage") {
  core::Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    BinaryMask small = random_mask(16, 16, rng, 0.3);
    BinaryMask big = small;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (rng.uniform() < 0.2) big.values(y, x) = 1;
    const BinaryMask s_out = defense::saf(small, 4);
    const BinaryMask b_out = defense::saf(big, 4);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) REQUIRE(s_out.values(y, x) <= b_out.values(y, x));
  }
}

TEST_CASE("saf rejects bad inputs; padding adapter handles non-square") {
  BinaryMask rect;
  rect.values = IntField::Zero(8, 6);
  CHECK_THROWS_AS(defense::saf(rect, 2), ShapeError);

  BinaryMask square;
  square.values = IntField::Zero(8, 8);
  CHECK_THROWS_AS(defense::saf(square, 0), ConfigError);
  CHECK_THROWS_AS(defense::saf(square, 9), ConfigError);

  rect.values.block(0, 0, 5, 5).setConstant(1);
  const BinaryMask padded = defense::saf_padded(rect, 2);
  CHECK(padded.height() == 8);
  CHECK(padded.width() == 6);
  padded.check_binary();
}

TEST_CASE("saf tau override") {
  BinaryMask m;
  m.values = IntField::Zero(8, 8);
  m.values(0, 0) = m.values(0, 1) = 1;  // subgrid sum 2
  CHECK(defense::saf(m, 2).ones_count() == 0);                 // tau = 4
  CHECK(defense::saf(m, 2, 1L).ones_count() == 16);            // tau = 1 < 2
}

namespace {

segmenter::PatchSegmenter make_silent_segmenter(int h, int w) {
  core::Rng rng(40);
  nn::UNet net(3, {4, 6, 8}, rng);
  // force the output head to strong negative logits -> empty mask
  auto params = net.parameters();
  auto& out_w = params[params.size() - 2];
  auto& out_b = params[params.size() - 1];
  out_w->value.fill(0.0);
  out_b->value.fill(-50.0);
  net.set_trainable(false);
  return segmenter::PatchSegmenter(std::move(net), h, w);
}

}  // namespace

TEST_CASE("defend_and_recognize with an all-zeros map equals the bare model") {
  core::Rng rng(41);
  nn::ConvNet net(3, {4, 6}, 4, rng);
  net.set_trainable(false);
  models::RecognitionModel fr(models::Mode::closed_set, std::move(net), 16, 16);
  const segmenter::PatchSegmenter silent = make_silent_segmenter(16, 16);

  Image img(16, 16);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) img.at(c, y, x) = rng.uniform();

  defense::DefensePipeline pipeline;
  pipeline.segmenter = &silent;
  pipeline.fr_model = &fr;
  const auto outcome = defense::defend_and_recognize(img, pipeline);
  CHECK(outcome.mask.ones_count() == 0);
  const Eigen::VectorXd direct = fr.predict_probs(img);
  CHECK((outcome.probs - direct).cwiseAbs().maxCoeff() == 0.0);

  // with SAF configured the empty mask stays empty
  pipeline.saf = defense::SafConfig{4, {}};
  const auto outcome2 = defense::defend_and_recognize(img, pipeline);
  CHECK(outcome2.mask.ones_count() == 0);
}

TEST_CASE("defend_with_ground_truth basics") {
  core::Rng rng(43);
  nn::ConvNet net(3, {4, 6}, 4, rng);
  net.set_trainable(false);
  models::RecognitionModel fr(models::Mode::closed_set, std::move(net), 16, 16);

  Image img(16, 16);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) img.at(c, y, x) = rng.uniform();

  BinaryMask zeros;
  zeros.values = IntField::Zero(16, 16);
  const auto outcome = defense::defend_with_ground_truth(img, zeros, fr, 0.0);
  CHECK((outcome.probs - fr.predict_probs(img)).cwiseAbs().maxCoeff() == 0.0);

  BinaryMask wrong;
  wrong.values = IntField::Zero(4, 4);
  CHECK_THROWS_AS(defense::defend_with_ground_truth(img, wrong, fr, 0.0), ShapeError);
}

TEST_CASE("pipeline validation catches missing components") {
  defense::DefensePipeline empty;
  CHECK_THROWS_AS(empty.validate(), ConfigError);
}
