#pragma once

#include <cmath>
#include <vector>

#include "radap/nn/graph.hpp"

namespace radap::nn {

struct SgdOptions {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool nesterov = true;
};

class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<NodeRef> params, SgdOptions options)
      : params_(std::move(params)), options_(options) {
    for (const auto& p : params_) velocity_.emplace_back(p->value.dims());
  }

  void zero_grad() {
    for (const auto& p : params_) {
      p->ensure_grad();
      p->grad.fill(0.0);
    }
  }

  void step(double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Node& p = *params_[i];
      Tensor& vel = velocity_[i];
      for (int j = 0; j < p.value.numel(); ++j) {
        const double g = p.grad[j] + options_.weight_decay * p.value[j];
        vel[j] = options_.momentum * vel[j] + g;
        const double update = options_.nesterov ? g + options_.momentum * vel[j] : vel[j];
        p.value[j] -= lr * update;
      }
    }
  }

 private:
  std::vector<NodeRef> params_;
  std::vector<Tensor> velocity_;
  SgdOptions options_;
};

// lr(epoch) = lr0 * 0.5 * (1 + cos(pi * epoch / total)), eta_min = 0.
inline double cosine_annealing_lr(double lr0, int epoch, int total_epochs) {
  if (total_epochs <= 0) return lr0;
  return lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(epoch) / total_epochs));
}

}  // namespace radap::nn
