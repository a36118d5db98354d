#include "radap/models/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "radap/core/fingerprint.hpp"
#include "radap/nn/convert.hpp"
#include "radap/nn/optim.hpp"

namespace radap::models {

double cross_entropy(const Eigen::VectorXd& p, const Eigen::VectorXd& y_onehot) {
  if (p.size() != y_onehot.size()) throw ShapeError("cross_entropy: size mismatch");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (y_onehot(i) == 0.0) continue;
    loss -= y_onehot(i) * std::log(std::max(p(i), 1e-12));
  }
  return loss;
}

double cross_entropy(const Eigen::VectorXd& p, int label) {
  if (label < 0 || label >= p.size()) throw ParameterError("cross_entropy: label out of range");
  return -std::log(std::max(p(label), 1e-12));
}

double cosine_similarity(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2) {
  if (v1.size() != v2.size()) throw ShapeError("cosine_similarity: size mismatch");
  const double n1 = v1.norm();
  const double n2 = v2.norm();
  if (n1 <= 0.0 || n2 <= 0.0) throw ParameterError("cosine_similarity: zero vector");
  return v1.dot(v2) / (n1 * n2);
}

RecognitionModel::RecognitionModel(Mode mode, nn::ConvNet net, int input_h, int input_w)
    : mode_(mode), net_(std::move(net)), input_h_(input_h), input_w_(input_w) {}

Eigen::MatrixXd RecognitionModel::predict_probs_batch(std::span<const Image> images) const {
  auto x = nn::make_const(nn::tensor_from_images(images));
  auto logits = net_.logits(x);
  const int n = logits->value.dim(0);
  const int k = logits->value.dim(1);
  Eigen::MatrixXd probs(n, k);
  for (int i = 0; i < n; ++i) {
    const double* row = logits->value.data() + static_cast<std::ptrdiff_t>(i) * k;
    double m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(row[j] - m);
    for (int j = 0; j < k; ++j) probs(i, j) = std::exp(row[j] - m) / denom;
  }
  return probs;
}

Eigen::VectorXd RecognitionModel::predict_probs(const Image& image) const {
  return predict_probs_batch(std::span<const Image>(&image, 1)).row(0);
}

int RecognitionModel::predict_label(const Image& image) const {
  const Eigen::VectorXd p = predict_probs(image);
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return static_cast<int>(best);
}

Eigen::VectorXd RecognitionModel::embed(const Image& image) const {
  auto x = nn::make_const(nn::tensor_from_image(image));
  auto feat = net_.features(x);
  Eigen::VectorXd e(feat->value.numel());
  for (int i = 0; i < feat->value.numel(); ++i) e(i) = feat->value[i];
  const double n = e.norm();
  if (n <= 0.0) throw ParameterError("embed: zero feature vector");
  return e / n;
}

RecognitionModel train_model(const data::Dataset& dataset, const TrainConfig& config,
                             std::vector<EpochLog>* log) {
  config.validate();
  if (dataset.images.empty()) throw DataError("train_model: empty dataset");
  const int h = dataset.images[0].height();
  const int w = dataset.images[0].width();

  core::Rng rng(config.seed);
  nn::ConvNet net(3, config.widths, dataset.num_classes, rng);
  nn::SgdOptimizer opt(net.parameters(),
                       {config.lr, config.momentum, config.weight_decay, config.nesterov});

  std::vector<int> order(dataset.images.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = nn::cosine_annealing_lr(config.lr, epoch, config.epochs);
    // Fisher-Yates on the shared rng keeps the whole run a function of the seed
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

    double epoch_loss = 0.0;
    long correct = 0;
    long seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<Image> batch;
      std::vector<int> labels;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(dataset.images[static_cast<std::size_t>(order[i])]);
        labels.push_back(dataset.labels[static_cast<std::size_t>(order[i])]);
      }
      batch = augment::augment_batch(batch, config.augment, rng);

      auto x = nn::make_const(nn::tensor_from_images(batch));
      auto logits = net.logits(x);
      auto loss = nn::softmax_cross_entropy(logits, labels);
      opt.zero_grad();
      nn::backward(loss);
      opt.step(lr);

      epoch_loss += loss->value[0] * static_cast<double>(batch.size());
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const double* row = logits->value.data() + static_cast<std::ptrdiff_t>(i) * dataset.num_classes;
        int arg = 0;
        for (int j = 1; j < dataset.num_classes; ++j)
          if (row[j] > row[arg]) arg = j;
        if (arg == labels[i]) ++correct;
      }
      seen += static_cast<long>(labels.size());
    }
    if (log)
      log->push_back({epoch, epoch_loss / static_cast<double>(seen),
                      100.0 * static_cast<double>(correct) / static_cast<double>(seen)});
  }

  net.set_trainable(false);
  const Mode mode = config.mode;
  return RecognitionModel(mode, std::move(net), h, w);
}

SimilarityThreshold calibrate_threshold(std::span<const double> impostor_similarities, double far) {
  if (!(far > 0.0 && far <= 1.0)) throw ParameterError("calibrate_threshold: far must be in (0, 1]");
  const std::size_t n = impostor_similarities.size();
  if (n == 0 || static_cast<double>(n) < 1.0 / far)
    throw DataError("calibrate_threshold: need at least 1/far impostor pairs");
  std::vector<double> sorted(impostor_similarities.begin(), impostor_similarities.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  const long allowed = static_cast<long>(std::floor(far * static_cast<double>(n)));
  // Accept strictly above the threshold; the (allowed+1)-th largest impostor
  // similarity is the smallest threshold keeping FAR <= far.
  SimilarityThreshold t;
  if (allowed >= static_cast<long>(n)) {
    t.value = -2.0;  // below any cosine similarity
  } else {
    t.value = sorted[static_cast<std::size_t>(allowed)];
  }
  return t;
}

SimilarityThreshold calibrate_threshold(const RecognitionModel& model, const PairList& impostor,
                                        const PairList& genuine, double far, double* tar_out) {
  std::vector<double> imp;
  imp.reserve(impostor.pairs.size());
  for (const auto& [a, b] : impostor.pairs) imp.push_back(cosine_similarity(model.embed(a), model.embed(b)));
  const SimilarityThreshold t = calibrate_threshold(imp, far);
  if (tar_out) {
    if (genuine.pairs.empty()) throw DataError("calibrate_threshold: no genuine pairs");
    long accepted = 0;
    for (const auto& [a, b] : genuine.pairs)
      if (cosine_similarity(model.embed(a), model.embed(b)) > t.value) ++accepted;
    *tar_out = 100.0 * static_cast<double>(accepted) / static_cast<double>(genuine.pairs.size());
  }
  return t;
}

void save_checkpoint(const RecognitionModel& model, const std::filesystem::path& path,
                     std::uint64_t config_fingerprint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out.write("RADAPFR1", 8);
  const std::uint32_t mode = model.mode() == Mode::closed_set ? 0 : 1;
  const std::uint32_t ih = static_cast<std::uint32_t>(model.input_height());
  const std::uint32_t iw = static_cast<std::uint32_t>(model.input_width());
  out.write(reinterpret_cast<const char*>(&mode), 4);
  out.write(reinterpret_cast<const char*>(&ih), 4);
  out.write(reinterpret_cast<const char*>(&iw), 4);
  model.net().save(out);
  if (!out) throw IoError("checkpoint write failed: " + path.string());
  out.close();

  nlohmann::json meta;
  meta["mode"] = model.mode() == Mode::closed_set ? "closed_set" : "open_set";
  if (model.mode() == Mode::closed_set)
    meta["num_classes"] = model.num_classes();
  else
    meta["embedding_dim"] = model.embedding_dim();
  meta["input_size"] = {model.input_height(), model.input_width()};
  meta["config_fingerprint"] = core::fingerprint_hex(config_fingerprint);
  std::ofstream side(path.string() + ".json");
  side << meta.dump(2) << "\n";
}

RecognitionModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("checkpoint missing: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "RADAPFR1")
    throw IoError("not a recognition checkpoint: " + path.string());
  std::uint32_t mode = 0, ih = 0, iw = 0;
  in.read(reinterpret_cast<char*>(&mode), 4);
  in.read(reinterpret_cast<char*>(&ih), 4);
  in.read(reinterpret_cast<char*>(&iw), 4);
  nn::ConvNet net = nn::ConvNet::load(in);
  return RecognitionModel(mode == 0 ? Mode::closed_set : Mode::open_set, std::move(net),
                          static_cast<int>(ih), static_cast<int>(iw));
}

}  // namespace radap::models
