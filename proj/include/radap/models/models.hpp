#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "radap/augment/augment.hpp"
#include "radap/data/toyfaces.hpp"
#include "radap/nn/layers.hpp"

namespace radap::models {

enum class Mode { closed_set, open_set };

// -sum_i y_i log p_i with a log clamp at 1e-12.
double cross_entropy(const Eigen::VectorXd& p, const Eigen::VectorXd& y_onehot);
double cross_entropy(const Eigen::VectorXd& p, int label);

// <v1, v2> / (|v1| |v2|); zero vectors are a domain error.
double cosine_similarity(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2);

struct TrainConfig {
  Mode mode = Mode::closed_set;
  int epochs = 50;
  int batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool nesterov = true;
  augment::AugmentPolicy augment{};
  std::uint64_t seed = 1;
  std::vector<int> widths{12, 24, 48, 64};

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
    augment.validate();
  }
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
};

// Either a K-class classifier (closed-set) or an embedding extractor with
// cosine-similarity comparison (open-set). Both share the conv trunk; the
// open-set embedding is the L2-normalized global-average-pooled feature.
class RecognitionModel {
 public:
  RecognitionModel() = default;
  RecognitionModel(Mode mode, nn::ConvNet net, int input_h, int input_w);

  Mode mode() const { return mode_; }
  int num_classes() const { return net_.num_classes(); }
  int embedding_dim() const { return net_.feature_dim(); }
  int input_height() const { return input_h_; }
  int input_width() const { return input_w_; }

  Eigen::VectorXd predict_probs(const Image& image) const;
  Eigen::MatrixXd predict_probs_batch(std::span<const Image> images) const;  // rows = samples
  int predict_label(const Image& image) const;
  Eigen::VectorXd embed(const Image& image) const;  // L2-normalized

  const nn::ConvNet& net() const { return net_; }
  nn::ConvNet& net() { return net_; }

 private:
  Mode mode_ = Mode::closed_set;
  nn::ConvNet net_;
  int input_h_ = 0;
  int input_w_ = 0;
};

RecognitionModel train_model(const data::Dataset& dataset, const TrainConfig& config,
                             std::vector<EpochLog>* log = nullptr);

struct SimilarityThreshold {
  double value = 0.0;
};

// Smallest threshold with empirical FAR <= far on the impostor similarities;
// acceptance is strict (similarity > threshold).
SimilarityThreshold calibrate_threshold(std::span<const double> impostor_similarities,
                                        double far);
struct PairList {
  std::vector<std::pair<Image, Image>> pairs;
};
SimilarityThreshold calibrate_threshold(const RecognitionModel& model, const PairList& impostor,
                                        const PairList& genuine, double far,
                                        double* tar_out = nullptr);

// Checkpoint: opaque weight blob plus a JSON sidecar (mode, K or dim, input
// size, training-config fingerprint).
void save_checkpoint(const RecognitionModel& model, const std::filesystem::path& path,
                     std::uint64_t config_fingerprint);
RecognitionModel load_checkpoint(const std::filesystem::path& path);

}  // namespace radap::models
