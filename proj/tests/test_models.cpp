#include <doctest.h>

#include "radap/models/models.hpp"

using namespace radap;

TEST_CASE("cross_entropy closed forms") {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  y(2) = 1.0;
  Eigen::VectorXd onehot = y;
  CHECK(models::cross_entropy(onehot, y) == doctest::Approx(0.0).epsilon(1e-12));

  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(4, 0.25);
  CHECK(models::cross_entropy(uniform, y) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(models::cross_entropy(uniform, 1) == doctest::Approx(1.3863).epsilon(1e-4));

  Eigen::VectorXd p(2);
  p << 0.7, 0.3;
  CHECK(models::cross_entropy(p, 0) == doctest::Approx(-std::log(0.7)).epsilon(1e-12));
  CHECK(models::cross_entropy(p, 0) == doctest::Approx(0.3567).epsilon(1e-3));

  // zero probability on the true class hits the log clamp
  Eigen::VectorXd degenerate(2);
  degenerate << 0.0, 1.0;
  CHECK(models::cross_entropy(degenerate, 0) == doctest::Approx(-std::log(1e-12)));

  CHECK(models::cross_entropy(p, 0) >= 0.0);
  CHECK_THROWS_AS(models::cross_entropy(p, 5), ParameterError);
}

TEST_CASE("cosine_similarity closed forms and scale invariance") {
  Eigen::VectorXd v(3);
  v << 1.0, -2.0, 0.5;
  CHECK(models::cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(models::cosine_similarity(v, Eigen::VectorXd(-v)) == doctest::Approx(-1.0).epsilon(1e-12));

  Eigen::VectorXd a(2), b(2);
  a << 1.0, 0.0;
  b << 1.0, 1.0;
  CHECK(models::cosine_similarity(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

  core::Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd v1(6), v2(6);
    for (int j = 0; j < 6; ++j) {
      v1(j) = rng.normal();
      v2(j) = rng.normal();
    }
    const double alpha = rng.uniform(0.1, 10.0);
    const double beta = rng.uniform(0.1, 10.0);
    CHECK(models::cosine_similarity(alpha * v1, beta * v2) ==
          doctest::Approx(models::cosine_similarity(v1, v2)).epsilon(1e-6));
  }

  CHECK_THROWS_AS(models::cosine_similarity(Eigen::VectorXd::Zero(3), v), ParameterError);
}

TEST_CASE("classifier probabilities sum to one") {
  core::Rng rng(9);
  nn::ConvNet net(3, {4, 6}, 5, rng);
  net.set_trainable(false);
  models::RecognitionModel model(models::Mode::closed_set, std::move(net), 16, 16);
  for (int trial = 0; trial < 8; ++trial) {
    Image img(16, 16);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) img.at(c, y, x) = rng.uniform();
    const Eigen::VectorXd p = model.predict_probs(img);
    CHECK(p.size() == 5);
    CHECK(std::abs(p.sum() - 1.0) < 1e-5);
    CHECK(p.minCoeff() >= 0.0);
  }
}

TEST_CASE("open-set embedding is normalized and finite") {
  core::Rng rng(10);
  nn::ConvNet net(3, {4, 8}, 5, rng);
  net.set_trainable(false);
  models::RecognitionModel model(models::Mode::open_set, std::move(net), 16, 16);
  Image img(16, 16);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) img.at(c, y, x) = rng.uniform();
  const Eigen::VectorXd e = model.embed(img);
  CHECK(e.size() == 8);
  CHECK(e.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(e.allFinite());
}

TEST_CASE("train_model rejects bad inputs and is seed-deterministic") {
  data::ToyFacesConfig dc;
  dc.identities = 3;
  dc.images_per_identity = 6;
  dc.height = 16;
  dc.width = 16;
  dc.seed = 4;
  const data::Dataset ds = data::generate_toyfaces(dc);

  models::TrainConfig tc;
  tc.epochs = 0;
  CHECK_THROWS_AS(models::train_model(ds, tc), ConfigError);

  tc.epochs = 1;
  tc.batch_size = 8;
  tc.widths = {4, 6};
  tc.seed = 11;
  CHECK_THROWS_AS(models::train_model(data::Dataset{}, tc), DataError);

  std::vector<models::EpochLog> log1, log2;
  models::train_model(ds, tc, &log1);
  models::train_model(ds, tc, &log2);
  REQUIRE(log1.size() == 1);
  CHECK(log1[0].train_loss == log2[0].train_loss);
}

TEST_CASE("calibrate_threshold counting semantics") {
  // separable case: every impostor below every genuine -> TAR = 100 at any far
  std::vector<double> impostor, genuine;
  core::Rng rng(3);
  for (int i = 0; i < 2000; ++i) impostor.push_back(rng.uniform(-1.0, 0.0));
  for (int i = 0; i < 500; ++i) genuine.push_back(rng.uniform(0.5, 1.0));

  for (double far : {0.001, 0.01, 0.5, 1.0}) {
    const auto t = models::calibrate_threshold(impostor, far);
    long accepted_gen = 0;
    for (double s : genuine)
      if (s > t.value) ++accepted_gen;
    CHECK(accepted_gen == static_cast<long>(genuine.size()));
    long accepted_imp = 0;
    for (double s : impostor)
      if (s > t.value) ++accepted_imp;
    CHECK(static_cast<double>(accepted_imp) / impostor.size() <= far);
  }

  // far = 1 accepts everything
  const auto loose = models::calibrate_threshold(impostor, 1.0);
  long all = 0;
  for (double s : impostor)
    if (s > loose.value) ++all;
  CHECK(all == static_cast<long>(impostor.size()));

  // 1000 impostors at far = 0.001 admits at most one
  std::vector<double> tight;
  for (int i = 0; i < 1000; ++i) tight.push_back(rng.uniform(-1.0, 1.0));
  const auto t = models::calibrate_threshold(tight, 0.001);
  long admitted = 0;
  for (double s : tight)
    if (s > t.value) ++admitted;
  CHECK(admitted <= 1);

  // too few pairs for the requested rate
  std::vector<double> few(10, 0.0);
  CHECK_THROWS_AS(models::calibrate_threshold(few, 0.001), DataError);
}

TEST_CASE("checkpoint round trip preserves predictions") {
  core::Rng rng(21);
  nn::ConvNet net(3, {4, 6}, 4, rng);
  net.set_trainable(false);
  models::RecognitionModel model(models::Mode::closed_set, std::move(net), 16, 16);

  Image img(16, 16);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) img.at(c, y, x) = rng.uniform();
  const Eigen::VectorXd before = model.predict_probs(img);

  const auto path = std::filesystem::temp_directory_path() / "radap_model_test.ckpt";
  models::save_checkpoint(model, path, 0xabcd);
  const models::RecognitionModel back = models::load_checkpoint(path);
  const Eigen::VectorXd after = back.predict_probs(img);
  CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.mode() == models::Mode::closed_set);
  CHECK(std::filesystem::exists(path.string() + ".json"));

  CHECK_THROWS_AS(models::load_checkpoint(path.string() + ".missing"), DependencyError);
}

TEST_CASE("toyfaces generator is deterministic and class-consistent") {
  data::ToyFacesConfig dc;
  dc.identities = 4;
  dc.images_per_identity = 5;
  dc.height = 16;
  dc.width = 16;
  dc.seed = 8;
  const data::Dataset a = data::generate_toyfaces(dc);
  const data::Dataset b = data::generate_toyfaces(dc);
  REQUIRE(a.images.size() == 20);
  CHECK(a.num_classes == 4);
  for (std::size_t i = 0; i < a.images.size(); ++i)
    CHECK(a.images[i].max_abs_diff(b.images[i]) == 0.0);

  // same identity varies per image, held-out identity pool differs
  CHECK(a.images[0].max_abs_diff(a.images[1]) > 0.0);

  dc.identity_offset = 100;
  const data::Dataset held_out = data::generate_toyfaces(dc);
  CHECK(held_out.images[0].max_abs_diff(a.images[0]) > 0.01);
}

TEST_CASE("dataset directory round trip") {
  data::ToyFacesConfig dc;
  dc.identities = 3;
  dc.images_per_identity = 4;
  dc.height = 16;
  dc.width = 16;
  dc.seed = 2;
  const data::Dataset ds = data::generate_toyfaces(dc);
  const auto dir = std::filesystem::temp_directory_path() / "radap_ds_test";
  std::filesystem::remove_all(dir);
  data::save_directory(ds, dir);
  const data::Dataset back = data::load_directory(dir);
  CHECK(back.num_classes == 3);
  CHECK(back.images.size() == 12);
  CHECK_THROWS_AS(data::load_directory(dir / "nope"), DataError);
}

TEST_CASE("per-identity split keeps fractions") {
  data::ToyFacesConfig dc;
  dc.identities = 2;
  dc.images_per_identity = 10;
  dc.height = 16;
  dc.width = 16;
  dc.seed = 3;
  const data::Dataset ds = data::generate_toyfaces(dc);
  const auto split = data::split_per_identity(ds, 2, 0.8);
  CHECK(split.train.images.size() == 16);
  CHECK(split.test.images.size() == 4);
}
