#include "radap/nn/layers.hpp"

#include <cmath>
#include <cstdint>

namespace radap::nn {

namespace {

Tensor he_normal(std::vector<int> dims, int fan_in, core::Rng& rng) {
  Tensor t(std::move(dims));
  const double std = std::sqrt(2.0 / fan_in);
  for (int i = 0; i < t.numel(); ++i) t[i] = rng.normal() * std;
  return t;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw IoError("truncated parameter stream");
  return v;
}

}  // namespace

Conv2dLayer make_conv(int in_ch, int out_ch, int kernel, core::Rng& rng) {
  Conv2dLayer layer;
  layer.w = make_leaf(he_normal({out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel, rng), true);
  layer.b = make_leaf(Tensor({out_ch}), true);
  layer.pad = kernel / 2;
  return layer;
}

LinearLayer make_linear(int in_f, int out_f, core::Rng& rng) {
  LinearLayer layer;
  layer.w = make_leaf(he_normal({out_f, in_f}, in_f, rng), true);
  layer.b = make_leaf(Tensor({out_f}), true);
  return layer;
}

NormLayer make_norm(int channels) {
  NormLayer layer;
  layer.gamma = make_leaf(Tensor({channels}), true);
  layer.gamma->value.fill(1.0);
  layer.beta = make_leaf(Tensor({channels}), true);
  for (int g : {4, 2, 1}) {
    if (channels % g == 0) {
      layer.groups = g;
      break;
    }
  }
  return layer;
}

void set_trainable(const std::vector<NodeRef>& params, bool trainable) {
  for (const auto& p : params) p->requires_grad = trainable;
}

void save_parameters(std::ostream& out, const std::vector<NodeRef>& params) {
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    write_u32(out, static_cast<std::uint32_t>(p->value.rank()));
    for (int d = 0; d < p->value.rank(); ++d)
      write_u32(out, static_cast<std::uint32_t>(p->value.dim(d)));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.numel() * sizeof(double)));
  }
  if (!out) throw IoError("parameter write failed");
}

void load_parameters(std::istream& in, const std::vector<NodeRef>& params) {
  const std::uint32_t count = read_u32(in);
  if (count != params.size()) throw IoError("parameter count mismatch in checkpoint");
  for (const auto& p : params) {
    const std::uint32_t rank = read_u32(in);
    if (static_cast<int>(rank) != p->value.rank())
      throw IoError("parameter rank mismatch in checkpoint");
    for (int d = 0; d < p->value.rank(); ++d)
      if (read_u32(in) != static_cast<std::uint32_t>(p->value.dim(d)))
        throw IoError("parameter shape mismatch in checkpoint");
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.numel() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint");
  }
}

// --- ConvNet -------------------------------------------------------------

ConvNet::ConvNet(int in_channels, std::vector<int> widths, int num_classes, core::Rng& rng)
    : widths_(std::move(widths)), num_classes_(num_classes), in_channels_(in_channels) {
  if (widths_.empty()) throw ConfigError("ConvNet: widths must be nonempty");
  int ch = in_channels_;
  for (int w : widths_) {
    blocks_.push_back(make_conv(ch, w, 3, rng));
    norms_.push_back(make_norm(w));
    ch = w;
  }
  head_ = make_linear(ch, num_classes_, rng);
}

NodeRef ConvNet::features(const NodeRef& x) const {
  // images arrive in [0,1]; center them for the normalization-free trunk
  NodeRef h = shift(x, -0.5);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    h = relu(norms_[i](blocks_[i](h)));
    if (i + 1 < blocks_.size()) h = maxpool2(h);
  }
  return global_avg_pool(h);
}

NodeRef ConvNet::logits(const NodeRef& x) const { return head_(features(x)); }

std::vector<NodeRef> ConvNet::parameters() const {
  std::vector<NodeRef> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    out.push_back(blocks_[i].w);
    out.push_back(blocks_[i].b);
    out.push_back(norms_[i].gamma);
    out.push_back(norms_[i].beta);
  }
  out.push_back(head_.w);
  out.push_back(head_.b);
  return out;
}

void ConvNet::set_trainable(bool trainable) { nn::set_trainable(parameters(), trainable); }

void ConvNet::save(std::ostream& out) const {
  write_u32(out, static_cast<std::uint32_t>(in_channels_));
  write_u32(out, static_cast<std::uint32_t>(num_classes_));
  write_u32(out, static_cast<std::uint32_t>(widths_.size()));
  for (int w : widths_) write_u32(out, static_cast<std::uint32_t>(w));
  save_parameters(out, parameters());
}

ConvNet ConvNet::load(std::istream& in) {
  const int in_ch = static_cast<int>(read_u32(in));
  const int classes = static_cast<int>(read_u32(in));
  const std::uint32_t n = read_u32(in);
  std::vector<int> widths(n);
  for (auto& w : widths) w = static_cast<int>(read_u32(in));
  core::Rng rng(0);
  ConvNet net(in_ch, widths, classes, rng);
  load_parameters(in, net.parameters());
  net.set_trainable(false);
  return net;
}

// --- UNet ----------------------------------------------------------------

UNet::UNet(int in_channels, std::vector<int> widths, core::Rng& rng)
    : widths_(std::move(widths)), in_channels_(in_channels) {
  if (widths_.size() != 3) throw ConfigError("UNet: expected three widths");
  const int w0 = widths_[0], w1 = widths_[1], w2 = widths_[2];
  e1a_ = make_conv(in_channels_, w0, 3, rng);
  e1b_ = make_conv(w0, w0, 3, rng);
  e2a_ = make_conv(w0, w1, 3, rng);
  e2b_ = make_conv(w1, w1, 3, rng);
  ba_ = make_conv(w1, w2, 3, rng);
  bb_ = make_conv(w2, w2, 3, rng);
  d2a_ = make_conv(w2 + w1, w1, 3, rng);
  d2b_ = make_conv(w1, w1, 3, rng);
  d1a_ = make_conv(w1 + w0, w0, 3, rng);
  d1b_ = make_conv(w0, w0, 3, rng);
  out_ = make_conv(w0, 1, 1, rng);
  out_.b->value.fill(-2.0);  // background prior: patch pixels are the minority
  n1a_ = make_norm(w0);
  n1b_ = make_norm(w0);
  n2a_ = make_norm(w1);
  n2b_ = make_norm(w1);
  nba_ = make_norm(w2);
  nbb_ = make_norm(w2);
  nd2a_ = make_norm(w1);
  nd2b_ = make_norm(w1);
  nd1a_ = make_norm(w0);
  nd1b_ = make_norm(w0);
}

NodeRef UNet::logits_map(const NodeRef& x) const {
  NodeRef s1 = relu(n1b_(e1b_(relu(n1a_(e1a_(shift(x, -0.5)))))));
  NodeRef s2 = relu(n2b_(e2b_(relu(n2a_(e2a_(maxpool2(s1)))))));
  NodeRef bott = relu(nbb_(bb_(relu(nba_(ba_(maxpool2(s2)))))));
  NodeRef u2 = relu(nd2b_(d2b_(relu(nd2a_(d2a_(concat_channels(upsample2(bott), s2)))))));
  NodeRef u1 = relu(nd1b_(d1b_(relu(nd1a_(d1a_(concat_channels(upsample2(u2), s1)))))));
  return out_(u1);
}

std::vector<NodeRef> UNet::parameters() const {
  std::vector<NodeRef> out;
  for (const Conv2dLayer* layer :
       {&e1a_, &e1b_, &e2a_, &e2b_, &ba_, &bb_, &d2a_, &d2b_, &d1a_, &d1b_, &out_}) {
    out.push_back(layer->w);
    out.push_back(layer->b);
  }
  for (const NormLayer* layer :
       {&n1a_, &n1b_, &n2a_, &n2b_, &nba_, &nbb_, &nd2a_, &nd2b_, &nd1a_, &nd1b_}) {
    out.push_back(layer->gamma);
    out.push_back(layer->beta);
  }
  return out;
}

void UNet::set_trainable(bool trainable) { nn::set_trainable(parameters(), trainable); }

void UNet::save(std::ostream& out) const {
  write_u32(out, static_cast<std::uint32_t>(in_channels_));
  write_u32(out, static_cast<std::uint32_t>(widths_.size()));
  for (int w : widths_) write_u32(out, static_cast<std::uint32_t>(w));
  save_parameters(out, parameters());
}

UNet UNet::load(std::istream& in) {
  const int in_ch = static_cast<int>(read_u32(in));
  const std::uint32_t n = read_u32(in);
  std::vector<int> widths(n);
  for (auto& w : widths) w = static_cast<int>(read_u32(in));
  core::Rng rng(0);
  UNet net(in_ch, widths, rng);
  load_parameters(in, net.parameters());
  net.set_trainable(false);
  return net;
}

}  // namespace radap::nn
