#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "radap/nn/tensor.hpp"

namespace radap::nn {

// Define-by-run tape. Parameter nodes persist across steps; op nodes are
// rebuilt every forward pass, so op gradients always start from zero.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same dims as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void()> backprop;  // pushes this->grad into the inputs' grads

  void ensure_grad() {
    if (grad.empty()) grad = Tensor::zeros(value.dims());
  }
};

using NodeRef = std::shared_ptr<Node>;

NodeRef make_leaf(Tensor value, bool requires_grad);
NodeRef make_const(Tensor value);

// Reverse-mode pass from a scalar root; seeds d(root) = 1.
void backward(const NodeRef& root);

// --- ops ---------------------------------------------------------------

// x: {N,C,H,W}; w: {OC,C,k,k}; b: {OC}; stride 1, zero padding `pad`.
NodeRef conv2d(const NodeRef& x, const NodeRef& w, const NodeRef& b, int pad);
NodeRef relu(const NodeRef& x);
NodeRef sigmoid(const NodeRef& x);
NodeRef maxpool2(const NodeRef& x);    // 2x2, stride 2
NodeRef upsample2(const NodeRef& x);   // nearest neighbor x2
NodeRef concat_channels(const NodeRef& a, const NodeRef& b);
NodeRef global_avg_pool(const NodeRef& x);  // {N,C,H,W} -> {N,C}
// x: {N,F}; w: {O,F}; b: {O}
NodeRef linear(const NodeRef& x, const NodeRef& w, const NodeRef& b);
NodeRef scale(const NodeRef& x, double s);
NodeRef shift(const NodeRef& x, double s);

// Per-sample group normalization over channel groups; gamma/beta are {C}.
NodeRef group_norm(const NodeRef& x, const NodeRef& gamma, const NodeRef& beta, int groups,
                   double eps = 1e-5);

// Mean cross-entropy over the batch from raw logits {N,K}.
NodeRef softmax_cross_entropy(const NodeRef& logits, const std::vector<int>& labels);

// Cosine similarity between a {1,C} (or {C}) node and a fixed vector.
NodeRef cosine_to(const NodeRef& x, const Tensor& target);

// Mean over batch of (1/HW) * sum(weight * bce(sigmoid(logit), target)),
// with target/weight given as constants shaped like the logits {N,1,H,W}.
NodeRef weighted_bce_with_logits(const NodeRef& logits, const Tensor& targets,
                                 const Tensor& weights);

// out = x * (1 - m) + fill * m with m {N,1,H,W} broadcast over x's channels.
NodeRef occlude(const NodeRef& x, const NodeRef& m, double fill);

// Custom elementwise-shaped op: forward arbitrary, backward via bwd(x, gout).
NodeRef custom_unary(const NodeRef& x, std::function<Tensor(const Tensor&)> fwd,
                     std::function<Tensor(const Tensor&, const Tensor&)> bwd);

}  // namespace radap::nn
