#include <doctest.h>

#include "radap/core/rng.hpp"
#include "radap/segmenter/segmenter.hpp"

using namespace radap;

namespace {

// brute-force correlation with explicit kernels and zero padding
Field sobel_oracle(const BinaryMask& mask) {
  const double sx[3][3] = {{1, 0, -1}, {2, 0, -2}, {1, 0, -1}};
  const double sy[3][3] = {{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}};
  const int h = mask.height(), w = mask.width();
  Field out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double gx = 0, gy = 0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const int yy = y + a - 1, xx = x + b - 1;
          const double v =
              (yy < 0 || yy >= h || xx < 0 || xx >= w) ? 0.0 : mask.values(yy, xx);
          gx += sx[a][b] * v;
          gy += sy[a][b] * v;
        }
      out(y, x) = std::sqrt(gx * gx + gy * gy);
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

TEST_CASE("sobel: constant masks have zero interior gradient") {
  BinaryMask zeros;
  zeros.values = IntField::Zero(6, 6);
  CHECK((segmenter::sobel_gradient_magnitude(zeros) == 0.0).all());

  BinaryMask ones;
  ones.values = IntField::Constant(6, 6, 1);
  const Field g = segmenter::sobel_gradient_magnitude(ones);
  for (int y = 1; y < 5; ++y)
    for (int x = 1; x < 5; ++x) CHECK(g(y, x) == 0.0);
  // zero padding registers the border as an edge
  CHECK(g(0, 2) > 0.0);
}

TEST_CASE("sobel: vertical step edge responds with magnitude 4") {
  BinaryMask step;
  step.values = IntField::Zero(8, 8);
  step.values.block(0, 0, 8, 4).setConstant(1);
  const Field g = segmenter::sobel_gradient_magnitude(step);
  // interior pixel just left of the edge: |Sx| = 4, |Sy| = 0
  for (int y = 1; y < 7; ++y) CHECK(g(y, 3) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(g(3, 1) == 0.0);  // well inside the constant region
}

TEST_CASE("sobel: single center pixel matches the hand oracle") {
  BinaryMask m;
  m.values = IntField::Zero(5, 5);
  m.values(2, 2) = 1;
  const Field g = segmenter::sobel_gradient_magnitude(m);
  const Field o = sobel_oracle(m);
  CHECK((g - o).abs().maxCoeff() == 0.0);
  CHECK(g(1, 1) == doctest::Approx(std::sqrt(2.0)));  // corner neighbor
  CHECK(g(1, 2) == doctest::Approx(2.0));             // direct neighbor
  CHECK(g(2, 2) == 0.0);                              // the pixel itself
}

TEST_CASE("sobel agrees with the brute-force oracle on random masks") {
  core::Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMask m = random_mask(16, 16, rng);
    const Field g = segmenter::sobel_gradient_magnitude(m);
    const Field o = sobel_oracle(m);
    CHECK((g - o).abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("ebce at beta 0 equals plain mean BCE") {
  core::Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const BinaryMask m = random_mask(16, 16, rng);
    Field pred(16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) pred(y, x) = rng.uniform(0.01, 0.99);

    // independent BCE implementation
    double bce = 0.0;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const double p = pred(y, x);
        bce -= m.values(y, x) * std::log(p) + (1 - m.values(y, x)) * std::log(1.0 - p);
      }
    bce /= 256.0;

    CHECK(std::abs(segmenter::ebce_loss(pred, m, 0.0) - bce) < 1e-9);
  }
}

TEST_CASE("ebce: perfect prediction gives (near) zero loss for any beta") {
  core::Rng rng(8);
  const BinaryMask m = random_mask(12, 12, rng);
  Field perfect(12, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) perfect(y, x) = m.values(y, x);
  for (double beta : {0.0, 1.0}) CHECK(segmenter::ebce_loss(perfect, m, beta) < 1e-10);
  // the clamp keeps a residual of weight * 1e-12 per pixel; at beta = 3 the
  // Sobel weights reach e^{12*sqrt(2)} and the bound loosens accordingly
  CHECK(segmenter::ebce_loss(perfect, m, 3.0) < 1e-6);
}

TEST_CASE("ebce closed form: one edge pixel with gradient 4") {
  // uniform prediction 0.5 makes every BCE term log 2; with a single
  // weighted pixel e^{beta*4} the sum is (1/16) log2 (15 + e^4)
  BinaryMask m;
  m.values = IntField::Zero(4, 4);
  Field grad_field = Field::Zero(4, 4);
  grad_field(1, 2) = 4.0;
  const Field pred = Field::Constant(4, 4, 0.5);
  const double expected = std::log(2.0) / 16.0 * (15.0 + std::exp(4.0));
  CHECK(std::abs(segmenter::ebce_loss_weighted(pred, m, grad_field, 1.0) - expected) < 1e-9);
}

TEST_CASE("ebce strictly increases with beta when errors sit on edges") {
  BinaryMask step;
  step.values = IntField::Zero(8, 8);
  step.values.block(0, 0, 8, 4).setConstant(1);
  Field pred(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) pred(y, x) = step.values(y, x) == 1 ? 0.7 : 0.3;
  double prev = -1.0;
  for (double beta : {0.0, 0.5, 1.0, 2.0}) {
    const double loss = segmenter::ebce_loss(pred, step, beta);
    CHECK(loss > prev);
    prev = loss;
  }
}

TEST_CASE("ebce analytic gradient matches central differences") {
  core::Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const BinaryMask m = random_mask(8, 8, rng);
    Field pred(8, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) pred(y, x) = rng.uniform(0.05, 0.95);
    const double beta = rng.uniform(0.0, 2.0);
    const Field grad = segmenter::ebce_loss_gradient(pred, m, beta);
    const double h = 1e-7;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        Field up = pred, down = pred;
        up(y, x) += h;
        down(y, x) -= h;
        const double numeric =
            (segmenter::ebce_loss(up, m, beta) - segmenter::ebce_loss(down, m, beta)) / (2 * h);
        const double denom = std::max({std::abs(numeric), std::abs(grad(y, x)), 1e-10});
        CHECK(std::abs(numeric - grad(y, x)) / denom < 1e-4);
      }
  }
}

TEST_CASE("ebce shape mismatch raises") {
  BinaryMask m;
  m.values = IntField::Zero(4, 4);
  CHECK_THROWS_AS(segmenter::ebce_loss(Field::Zero(5, 4), m, 1.0), ShapeError);
}

TEST_CASE("binarize_map thresholds at 0.5") {
  CHECK(segmenter::binarize_map(Field::Constant(4, 4, 0.4)).ones_count() == 0);
  CHECK(segmenter::binarize_map(Field::Constant(4, 4, 0.6)).ones_count() == 16);
  Field one(4, 4);
  one.setConstant(0.1);
  one(2, 1) = 0.9;
  const BinaryMask m = segmenter::binarize_map(one);
  CHECK(m.ones_count() == 1);
  CHECK(m.values(2, 1) == 1);
  CHECK(m.origin == MaskOrigin::segmenter);
}

TEST_CASE("segmenter training rejects empty data and logs decreasing loss") {
  segmenter::SegTrainConfig cfg;
  CHECK_THROWS_AS(segmenter::train_segmenter({}, cfg), DataError);

  // tiny smoke set: bright square on dark background
  std::vector<segmenter::SegSample> samples;
  core::Rng rng(4);
  for (int i = 0; i < 24; ++i) {
    Image img(16, 16);
    BinaryMask m;
    m.values = IntField::Zero(16, 16);
    const int y0 = rng.uniform_int(2, 8), x0 = rng.uniform_int(2, 8);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const bool inside = y >= y0 && y < y0 + 6 && x >= x0 && x < x0 + 6;
        m.values(y, x) = inside ? 1 : 0;
        for (int c = 0; c < 3; ++c)
          img.at(c, y, x) = inside ? rng.uniform(0.7, 1.0) : rng.uniform(0.0, 0.2);
      }
    samples.push_back({img, m});
  }
  cfg.epochs = 8;
  cfg.batch_size = 8;
  cfg.widths = {4, 6, 8};
  cfg.seed = 5;
  std::vector<segmenter::SegEpochLog> log;
  const auto seg = segmenter::train_segmenter(samples, cfg, &log);
  REQUIRE(log.size() == 8);
  CHECK(log.back().train_loss < log.front().train_loss);

  // determinism of the first epoch
  std::vector<segmenter::SegEpochLog> log2;
  segmenter::SegTrainConfig cfg2 = cfg;
  cfg2.epochs = 1;
  segmenter::train_segmenter(samples, cfg2, &log2);
  CHECK(log2[0].train_loss == log[0].train_loss);

  // prediction surface: probabilities in [0,1], binary mask out
  const Field map = seg.predict_map(samples[0].image);
  CHECK(map.minCoeff() >= 0.0);
  CHECK(map.maxCoeff() <= 1.0);
  const BinaryMask pm = segmenter::predict_mask(seg, samples[0].image);
  pm.check_binary();
}

TEST_CASE("segmenter checkpoint round trip") {
  core::Rng rng(6);
  nn::UNet net(3, {4, 6, 8}, rng);
  net.set_trainable(false);
  segmenter::PatchSegmenter seg(std::move(net), 16, 16);
  Image img(16, 16);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) img.at(c, y, x) = rng.uniform();
  const Field before = seg.predict_map(img);
  const auto path = std::filesystem::temp_directory_path() / "radap_seg_test.ckpt";
  segmenter::save_checkpoint(seg, path, 0x1);
  const auto back = segmenter::load_checkpoint(path);
  CHECK((back.predict_map(img) - before).abs().maxCoeff() == 0.0);
}

TEST_CASE("pixel_iou") {
  BinaryMask a, b;
  a.values = IntField::Zero(4, 4);
  b.values = IntField::Zero(4, 4);
  a.values.block(0, 0, 2, 2).setConstant(1);
  b.values.block(0, 0, 2, 2).setConstant(1);
  CHECK(segmenter::pixel_iou(a, b) == doctest::Approx(1.0));
  b.values.setZero();
  b.values.block(0, 1, 2, 2).setConstant(1);
  CHECK(segmenter::pixel_iou(a, b) == doctest::Approx(2.0 / 6.0));
}
