#pragma once

#include <iostream>
#include <vector>

#include "radap/core/rng.hpp"
#include "radap/nn/graph.hpp"

namespace radap::nn {

struct Conv2dLayer {
  NodeRef w;  // {OC, C, k, k}
  NodeRef b;  // {OC}
  int pad = 1;

  NodeRef operator()(const NodeRef& x) const { return conv2d(x, w, b, pad); }
};

struct LinearLayer {
  NodeRef w;  // {O, F}
  NodeRef b;  // {O}

  NodeRef operator()(const NodeRef& x) const { return linear(x, w, b); }
};

struct NormLayer {
  NodeRef gamma;  // {C}
  NodeRef beta;   // {C}
  int groups = 1;

  NodeRef operator()(const NodeRef& x) const { return group_norm(x, gamma, beta, groups); }
};

Conv2dLayer make_conv(int in_ch, int out_ch, int kernel, core::Rng& rng);
LinearLayer make_linear(int in_f, int out_f, core::Rng& rng);
NormLayer make_norm(int channels);

void set_trainable(const std::vector<NodeRef>& params, bool trainable);
void save_parameters(std::ostream& out, const std::vector<NodeRef>& params);
void load_parameters(std::istream& in, const std::vector<NodeRef>& params);

// Conv trunk for the recognition models: conv-relu-pool blocks followed by a
// final conv-relu and global average pooling; a linear head produces logits.
class ConvNet {
 public:
  ConvNet() = default;
  ConvNet(int in_channels, std::vector<int> widths, int num_classes, core::Rng& rng);

  NodeRef features(const NodeRef& x) const;  // {N, widths.back()}
  NodeRef logits(const NodeRef& x) const;    // {N, num_classes}

  std::vector<NodeRef> parameters() const;
  void set_trainable(bool trainable);

  int num_classes() const { return num_classes_; }
  int feature_dim() const { return widths_.empty() ? 0 : widths_.back(); }
  const std::vector<int>& widths() const { return widths_; }
  int in_channels() const { return in_channels_; }

  void save(std::ostream& out) const;
  static ConvNet load(std::istream& in);

 private:
  std::vector<Conv2dLayer> blocks_;
  std::vector<NormLayer> norms_;
  LinearLayer head_;
  std::vector<int> widths_;
  int num_classes_ = 0;
  int in_channels_ = 0;
};

// Small U-Net: two encoder levels, a bottleneck, skip connections, and a
// 1x1 output head producing a single-channel logit map.
class UNet {
 public:
  UNet() = default;
  UNet(int in_channels, std::vector<int> widths, core::Rng& rng);

  NodeRef logits_map(const NodeRef& x) const;  // {N,1,H,W}

  std::vector<NodeRef> parameters() const;
  void set_trainable(bool trainable);
  const std::vector<int>& widths() const { return widths_; }
  int in_channels() const { return in_channels_; }

  void save(std::ostream& out) const;
  static UNet load(std::istream& in);

 private:
  Conv2dLayer e1a_, e1b_, e2a_, e2b_, ba_, bb_, d2a_, d2b_, d1a_, d1b_, out_;
  NormLayer n1a_, n1b_, n2a_, n2b_, nba_, nbb_, nd2a_, nd2b_, nd1a_, nd1b_;
  std::vector<int> widths_;
  int in_channels_ = 0;
};

}  // namespace radap::nn
