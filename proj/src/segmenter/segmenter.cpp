#include "radap/segmenter/segmenter.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "radap/core/fingerprint.hpp"
#include "radap/core/rng.hpp"
#include "radap/nn/convert.hpp"
#include "radap/nn/optim.hpp"

namespace radap::segmenter {

namespace {

constexpr double kSobelX[3][3] = {{1, 0, -1}, {2, 0, -2}, {1, 0, -1}};
constexpr double kSobelY[3][3] = {{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}};

constexpr double kProbClamp = 1e-12;

}  // namespace

Field sobel_gradient_magnitude(const BinaryMask& mask) {
  mask.check_binary();
  const int h = mask.height();
  const int w = mask.width();
  Field out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = 0.0, gy = 0.0;
      for (int di = -1; di <= 1; ++di) {
        const int sy = y + di;
        if (sy < 0 || sy >= h) continue;
        for (int dj = -1; dj <= 1; ++dj) {
          const int sx = x + dj;
          if (sx < 0 || sx >= w) continue;
          const double v = mask.values(sy, sx);
          gx += kSobelX[di + 1][dj + 1] * v;
          gy += kSobelY[di + 1][dj + 1] * v;
        }
      }
      out(y, x) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

double ebce_loss_weighted(const Field& prediction, const BinaryMask& truth,
                          const Field& gradient_field, double beta) {
  const int h = truth.height();
  const int w = truth.width();
  if (prediction.rows() != h || prediction.cols() != w || gradient_field.rows() != h ||
      gradient_field.cols() != w)
    throw ShapeError("ebce_loss: shape mismatch");
  double loss = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double p = std::clamp(prediction(y, x), kProbClamp, 1.0 - kProbClamp);
      const double m = truth.values(y, x);
      const double weight = std::exp(beta * gradient_field(y, x));
      loss -= weight * (m * std::log(p) + (1.0 - m) * std::log(1.0 - p));
    }
  }
  return loss / (static_cast<double>(h) * w);
}

double ebce_loss(const Field& prediction, const BinaryMask& truth, double beta) {
  return ebce_loss_weighted(prediction, truth, sobel_gradient_magnitude(truth), beta);
}

Field ebce_loss_gradient(const Field& prediction, const BinaryMask& truth, double beta) {
  const int h = truth.height();
  const int w = truth.width();
  if (prediction.rows() != h || prediction.cols() != w)
    throw ShapeError("ebce_loss_gradient: shape mismatch");
  const Field grad_field = sobel_gradient_magnitude(truth);
  Field out(h, w);
  const double scale = 1.0 / (static_cast<double>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double p = std::clamp(prediction(y, x), kProbClamp, 1.0 - kProbClamp);
      const double m = truth.values(y, x);
      const double weight = std::exp(beta * grad_field(y, x));
      // d/dp of -w [m log p + (1-m) log(1-p)]
      out(y, x) = scale * weight * ((1.0 - m) / (1.0 - p) - m / p);
    }
  }
  return out;
}

PatchSegmenter::PatchSegmenter(nn::UNet net, int input_h, int input_w)
    : net_(std::move(net)), input_h_(input_h), input_w_(input_w) {}

std::vector<Field> PatchSegmenter::predict_map_batch(std::span<const Image> images) const {
  auto x = nn::make_const(nn::tensor_from_images(images));
  auto probs = nn::sigmoid(net_.logits_map(x));
  std::vector<Field> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    out.push_back(nn::field_from_tensor_plane(probs->value, static_cast<int>(i), 0));
  return out;
}

Field PatchSegmenter::predict_map(const Image& image) const {
  return predict_map_batch(std::span<const Image>(&image, 1))[0];
}

PatchSegmenter train_segmenter(const std::vector<SegSample>& dataset, const SegTrainConfig& config,
                               std::vector<SegEpochLog>* log) {
  config.validate();
  if (dataset.empty()) throw DataError("train_segmenter: empty dataset");
  const int h = dataset[0].image.height();
  const int w = dataset[0].image.width();

  core::Rng rng(config.seed);
  nn::UNet net(3, config.widths, rng);
  nn::SgdOptimizer opt(net.parameters(),
                       {config.lr, config.momentum, config.weight_decay, config.nesterov});

  // EBCE weights depend only on the ground truth; precompute once.
  std::vector<Field> weights;
  weights.reserve(dataset.size());
  for (const auto& sample : dataset)
    weights.push_back((config.beta * sobel_gradient_magnitude(sample.mask)).exp());

  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = nn::cosine_annealing_lr(config.lr, epoch, config.epochs);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

    double epoch_loss = 0.0;
    long seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const int n = static_cast<int>(end - start);
      std::vector<Image> batch;
      batch.reserve(static_cast<std::size_t>(n));
      nn::Tensor targets({n, 1, h, w});
      nn::Tensor wgt({n, 1, h, w});
      for (int i = 0; i < n; ++i) {
        const auto& sample = dataset[static_cast<std::size_t>(order[start + static_cast<std::size_t>(i)])];
        batch.push_back(sample.image);
        const auto& weight = weights[static_cast<std::size_t>(order[start + static_cast<std::size_t>(i)])];
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            targets[(i * h + y) * w + x] = static_cast<double>(sample.mask.values(y, x));
            wgt[(i * h + y) * w + x] = weight(y, x);
          }
      }
      auto x = nn::make_const(nn::tensor_from_images(batch));
      auto logits = net.logits_map(x);
      auto loss = nn::weighted_bce_with_logits(logits, targets, wgt);
      opt.zero_grad();
      nn::backward(loss);
      opt.step(lr);
      epoch_loss += loss->value[0] * n;
      seen += n;
    }
    if (log) log->push_back({epoch, epoch_loss / static_cast<double>(seen)});
  }

  net.set_trainable(false);
  return PatchSegmenter(std::move(net), h, w);
}

BinaryMask binarize_map(const Field& probability_map) {
  BinaryMask mask;
  mask.values = (probability_map > 0.5).cast<int>();
  mask.origin = MaskOrigin::segmenter;
  return mask;
}

BinaryMask predict_mask(const PatchSegmenter& segmenter, const Image& image) {
  return binarize_map(segmenter.predict_map(image));
}

double pixel_iou(const BinaryMask& predicted, const BinaryMask& truth) {
  if (predicted.height() != truth.height() || predicted.width() != truth.width())
    throw ShapeError("pixel_iou: shape mismatch");
  long inter = 0, uni = 0;
  for (int y = 0; y < truth.height(); ++y)
    for (int x = 0; x < truth.width(); ++x) {
      const bool a = predicted.values(y, x) != 0;
      const bool b = truth.values(y, x) != 0;
      inter += (a && b) ? 1 : 0;
      uni += (a || b) ? 1 : 0;
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void save_checkpoint(const PatchSegmenter& segmenter, const std::filesystem::path& path,
                     std::uint64_t config_fingerprint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out.write("RADAPSG1", 8);
  const std::uint32_t ih = static_cast<std::uint32_t>(segmenter.input_height());
  const std::uint32_t iw = static_cast<std::uint32_t>(segmenter.input_width());
  out.write(reinterpret_cast<const char*>(&ih), 4);
  out.write(reinterpret_cast<const char*>(&iw), 4);
  segmenter.net().save(out);
  if (!out) throw IoError("checkpoint write failed: " + path.string());
  out.close();

  nlohmann::json meta;
  meta["kind"] = "patch_segmenter";
  meta["input_size"] = {segmenter.input_height(), segmenter.input_width()};
  meta["config_fingerprint"] = core::fingerprint_hex(config_fingerprint);
  std::ofstream side(path.string() + ".json");
  side << meta.dump(2) << "\n";
}

PatchSegmenter load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("checkpoint missing: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "RADAPSG1")
    throw IoError("not a segmenter checkpoint: " + path.string());
  std::uint32_t ih = 0, iw = 0;
  in.read(reinterpret_cast<char*>(&ih), 4);
  in.read(reinterpret_cast<char*>(&iw), 4);
  nn::UNet net = nn::UNet::load(in);
  return PatchSegmenter(std::move(net), static_cast<int>(ih), static_cast<int>(iw));
}

}  // namespace radap::segmenter
