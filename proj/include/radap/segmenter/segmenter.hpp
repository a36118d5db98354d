#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "radap/core/field.hpp"
#include "radap/core/image.hpp"
#include "radap/nn/layers.hpp"

namespace radap::segmenter {

// sqrt((M (*) Sx)^2 + (M (*) Sy)^2) with the 3x3 Sobel kernels, zero padding,
// stride 1, same output size.
Field sobel_gradient_magnitude(const BinaryMask& mask);

// Edge-aware BCE with the per-pixel weight e^{beta * grad} supplied directly;
// predictions are clamped to [1e-12, 1 - 1e-12] inside the logs.
double ebce_loss_weighted(const Field& prediction, const BinaryMask& truth,
                          const Field& gradient_field, double beta);

// Standard form: the weight field is the Sobel gradient magnitude of the
// ground-truth mask.
double ebce_loss(const Field& prediction, const BinaryMask& truth, double beta);

// Analytic d(loss)/d(prediction) for the standard form.
Field ebce_loss_gradient(const Field& prediction, const BinaryMask& truth, double beta);

struct SegTrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool nesterov = true;
  double beta = 1.0;  // EBCE edge weight; beta = 0 reduces to plain BCE
  std::uint64_t seed = 1;
  std::vector<int> widths{12, 24, 48};

  void validate() const {
    if (epochs < 1) throw ConfigError("segmenter: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("segmenter: batch_size must be >= 1");
    if (!(beta >= 0.0) || !std::isfinite(beta))
      throw ConfigError("segmenter: beta must be finite and >= 0");
  }
};

struct SegSample {
  Image image;
  BinaryMask mask;
};

struct SegEpochLog {
  int epoch = 0;
  double train_loss = 0.0;
};

// Encoder-decoder patch segmenter producing a per-pixel patch probability map.
class PatchSegmenter {
 public:
  PatchSegmenter() = default;
  PatchSegmenter(nn::UNet net, int input_h, int input_w);

  Field predict_map(const Image& image) const;  // probabilities in [0, 1]
  std::vector<Field> predict_map_batch(std::span<const Image> images) const;

  int input_height() const { return input_h_; }
  int input_width() const { return input_w_; }
  const nn::UNet& net() const { return net_; }
  nn::UNet& net() { return net_; }

 private:
  nn::UNet net_;
  int input_h_ = 0;
  int input_w_ = 0;
};

PatchSegmenter train_segmenter(const std::vector<SegSample>& dataset, const SegTrainConfig& config,
                               std::vector<SegEpochLog>* log = nullptr);

// (map > 0.5) with origin = segmenter; the binarization used by predict_mask.
BinaryMask binarize_map(const Field& probability_map);

// M_PS = (probability map > 0.5), origin = segmenter.
BinaryMask predict_mask(const PatchSegmenter& segmenter, const Image& image);

double pixel_iou(const BinaryMask& predicted, const BinaryMask& truth);

void save_checkpoint(const PatchSegmenter& segmenter, const std::filesystem::path& path,
                     std::uint64_t config_fingerprint);
PatchSegmenter load_checkpoint(const std::filesystem::path& path);

}  // namespace radap::segmenter
