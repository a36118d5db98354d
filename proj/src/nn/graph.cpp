#include "radap/nn/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace radap::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

NodeRef make_op(Tensor value, std::vector<NodeRef> inputs) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->inputs = std::move(inputs);
  for (const auto& in : node->inputs)
    if (in->requires_grad) node->requires_grad = true;
  return node;
}

void require_nchw(const Tensor& t, const char* op) {
  if (t.rank() != 4) throw ShapeError(std::string(op) + ": expected a {N,C,H,W} tensor");
}

// col is (C*k*k) x (H*W), row-major.
void im2col(const double* x, int c_in, int h, int w, int k, int pad, double* col) {
  const int hw = h * w;
  for (int c = 0; c < c_in; ++c) {
    const double* plane = x + static_cast<std::ptrdiff_t>(c) * hw;
    for (int di = 0; di < k; ++di) {
      for (int dj = 0; dj < k; ++dj) {
        double* row = col + static_cast<std::ptrdiff_t>((c * k + di) * k + dj) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + di - pad;
          if (sy < 0 || sy >= h) {
            std::fill(row + y * w, row + (y + 1) * w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::ptrdiff_t>(sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + dj - pad;
            row[y * w + xx] = (sx < 0 || sx >= w) ? 0.0 : src[sx];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, int c_in, int h, int w, int k, int pad, double* x) {
  const int hw = h * w;
  for (int c = 0; c < c_in; ++c) {
    double* plane = x + static_cast<std::ptrdiff_t>(c) * hw;
    for (int di = 0; di < k; ++di) {
      for (int dj = 0; dj < k; ++dj) {
        const double* row = col + static_cast<std::ptrdiff_t>((c * k + di) * k + dj) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + di - pad;
          if (sy < 0 || sy >= h) continue;
          double* dst = plane + static_cast<std::ptrdiff_t>(sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + dj - pad;
            if (sx >= 0 && sx < w) dst[sx] += row[y * w + xx];
          }
        }
      }
    }
  }
}

double softplus(double z) { return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0); }

double sigmoid_scalar(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

NodeRef make_leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

NodeRef make_const(Tensor value) { return make_leaf(std::move(value), false); }

void backward(const NodeRef& root) {
  if (root->value.numel() != 1) throw ShapeError("backward: root must be a scalar");
  if (!root->requires_grad) return;

  // iterative post-order
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx].get();
      ++idx;
      if (child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop();
}

NodeRef conv2d(const NodeRef& x, const NodeRef& w, const NodeRef& b, int pad) {
  require_nchw(x->value, "conv2d");
  if (w->value.rank() != 4) throw ShapeError("conv2d: weight must be {OC,C,k,k}");
  const int n = x->value.dim(0), c_in = x->value.dim(1), h = x->value.dim(2), wd = x->value.dim(3);
  const int oc = w->value.dim(0), k = w->value.dim(2);
  if (w->value.dim(1) != c_in || w->value.dim(3) != k)
    throw ShapeError("conv2d: weight channels do not match input");
  if (b->value.numel() != oc) throw ShapeError("conv2d: bias size mismatch");

  const int hw = h * wd;
  const int ckk = c_in * k * k;
  Tensor out({n, oc, h, wd});
  Tensor col({ckk, hw});
  MapConstMat wm(w->value.data(), oc, ckk);
  for (int i = 0; i < n; ++i) {
    im2col(x->value.data() + static_cast<std::ptrdiff_t>(i) * c_in * hw, c_in, h, wd, k, pad,
           col.data());
    MapConstMat cm(col.data(), ckk, hw);
    MapMat ym(out.data() + static_cast<std::ptrdiff_t>(i) * oc * hw, oc, hw);
    ym.noalias() = wm * cm;
    for (int o = 0; o < oc; ++o) ym.row(o).array() += b->value[o];
  }

  auto node = make_op(std::move(out), {x, w, b});
  Node* self = node.get();
  Node* xn = x.get();
  Node* wn = w.get();
  Node* bn = b.get();
  node->backprop = [self, xn, wn, bn, n, c_in, h, wd, oc, k, pad]() {
    const int hw = h * wd;
    const int ckk = c_in * k * k;
    Tensor col({ckk, hw});
    Tensor dcol({ckk, hw});
    MapConstMat wm(wn->value.data(), oc, ckk);
    if (xn->requires_grad) xn->ensure_grad();
    if (wn->requires_grad) wn->ensure_grad();
    if (bn->requires_grad) bn->ensure_grad();
    for (int i = 0; i < n; ++i) {
      MapConstMat gy(self->grad.data() + static_cast<std::ptrdiff_t>(i) * oc * hw, oc, hw);
      if (wn->requires_grad || xn->requires_grad)
        im2col(xn->value.data() + static_cast<std::ptrdiff_t>(i) * c_in * hw, c_in, h, wd, k, pad,
               col.data());
      if (wn->requires_grad) {
        MapConstMat cm(col.data(), ckk, hw);
        MapMat gw(wn->grad.data(), oc, ckk);
        gw.noalias() += gy * cm.transpose();
      }
      if (bn->requires_grad)
        for (int o = 0; o < oc; ++o) bn->grad[o] += gy.row(o).sum();
      if (xn->requires_grad) {
        MapMat dc(dcol.data(), ckk, hw);
        dc.noalias() = wm.transpose() * gy;
        col2im_add(dcol.data(), c_in, h, wd, k, pad,
                   xn->grad.data() + static_cast<std::ptrdiff_t>(i) * c_in * hw);
      }
    }
  };
  return node;
}

NodeRef relu(const NodeRef& x) {
  Tensor out = x->value;
  for (int i = 0; i < out.numel(); ++i)
    if (out[i] < 0.0) out[i] = 0.0;
  auto node = make_op(std::move(out), {x});
  Node* self = node.get();
  Node* xn = x.get();
  node->backprop = [self, xn]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int i = 0; i < self->grad.numel(); ++i)
      if (xn->value[i] > 0.0) xn->grad[i] += self->grad[i];
  };
  return node;
}

NodeRef sigmoid(const NodeRef& x) {
  Tensor out = x->value;
  for (int i = 0; i < out.numel(); ++i) out[i] = sigmoid_scalar(out[i]);
  auto node = make_op(std::move(out), {x});
  Node* self = node.get();
  Node* xn = x.get();
  node->backprop = [self, xn]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int i = 0; i < self->grad.numel(); ++i) {
      const double s = self->value[i];
      xn->grad[i] += self->grad[i] * s * (1.0 - s);
    }
  };
  return node;
}

NodeRef maxpool2(const NodeRef& x) {
  require_nchw(x->value, "maxpool2");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("maxpool2: spatial dims must be even");
  const int oh = h / 2, ow = w / 2;
  Tensor out({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(out.numel()));
  int oi = 0;
  for (int i = 0; i < n * c; ++i) {
    const double* plane = x->value.data() + static_cast<std::ptrdiff_t>(i) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx, ++oi) {
        int best = (2 * y) * w + 2 * xx;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * y + dy) * w + 2 * xx + dx;
            if (plane[idx] > plane[best]) best = idx;
          }
        out[oi] = plane[best];
        (*argmax)[static_cast<std::size_t>(oi)] = i * h * w + best;
      }
    }
  }
  auto node = make_op(std::move(out), {x});
  Node* self = node.get();
  Node* xn = x.get();
  node->backprop = [self, xn, argmax]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int i = 0; i < self->grad.numel(); ++i)
      xn->grad[(*argmax)[static_cast<std::size_t>(i)]] += self->grad[i];
  };
  return node;
}

NodeRef upsample2(const NodeRef& x) {
  require_nchw(x->value, "upsample2");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
  Tensor out({n, c, 2 * h, 2 * w});
  for (int i = 0; i < n * c; ++i) {
    const double* src = x->value.data() + static_cast<std::ptrdiff_t>(i) * h * w;
    double* dst = out.data() + static_cast<std::ptrdiff_t>(i) * 4 * h * w;
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
  }
  auto node = make_op(std::move(out), {x});
  Node* self = node.get();
  Node* xn = x.get();
  node->backprop = [self, xn, n, c, h, w]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int i = 0; i < n * c; ++i) {
      const double* g = self->grad.data() + static_cast<std::ptrdiff_t>(i) * 4 * h * w;
      double* gx = xn->grad.data() + static_cast<std::ptrdiff_t>(i) * h * w;
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) gx[(y / 2) * w + xx / 2] += g[y * 2 * w + xx];
    }
  };
  return node;
}

NodeRef concat_channels(const NodeRef& a, const NodeRef& b) {
  require_nchw(a->value, "concat_channels");
  require_nchw(b->value, "concat_channels");
  const int n = a->value.dim(0), ca = a->value.dim(1), h = a->value.dim(2), w = a->value.dim(3);
  const int cb = b->value.dim(1);
  if (b->value.dim(0) != n || b->value.dim(2) != h || b->value.dim(3) != w)
    throw ShapeError("concat_channels: shape mismatch");
  const int hw = h * w;
  Tensor out({n, ca + cb, h, w});
  for (int i = 0; i < n; ++i) {
    std::copy_n(a->value.data() + static_cast<std::ptrdiff_t>(i) * ca * hw, ca * hw,
                out.data() + static_cast<std::ptrdiff_t>(i) * (ca + cb) * hw);
    std::copy_n(b->value.data() + static_cast<std::ptrdiff_t>(i) * cb * hw, cb * hw,
                out.data() + static_cast<std::ptrdiff_t>(i) * (ca + cb) * hw + ca * hw);
  }
  auto node = make_op(std::move(out), {a, b});
  Node* self = node.get();
  Node* an = a.get();
  Node* bn = b.get();
  node->backprop = [self, an, bn, n, ca, cb, hw]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const double* g = self->grad.data() + static_cast<std::ptrdiff_t>(i) * (ca + cb) * hw;
        double* ga = an->grad.data() + static_cast<std::ptrdiff_t>(i) * ca * hw;
        for (int j = 0; j < ca * hw; ++j) ga[j] += g[j];
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const double* g =
            self->grad.data() + static_cast<std::ptrdiff_t>(i) * (ca + cb) * hw + ca * hw;
        double* gb = bn->grad.data() + static_cast<std::ptrdiff_t>(i) * cb * hw;
        for (int j = 0; j < cb * hw; ++j) gb[j] += g[j];
      }
    }
  };
  return node;
}

NodeRef global_avg_pool(const NodeRef& x) {
  require_nchw(x->value, "global_avg_pool");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
  const int hw = h * w;
  Tensor out({n, c});
  for (int i = 0; i < n * c; ++i) {
    const double* plane = x->value.data() + static_cast<std::ptrdiff_t>(i) * hw;
    double s = 0.0;
    for (int j = 0; j < hw; ++j) s += plane[j];
    out[i] = s / hw;
  }
  auto node = make_op(std::move(out), {x});
  Node* self = node.get();
  Node* xn = x.get();
  node->backprop = [self, xn, n, c, hw]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int i = 0; i < n * c; ++i) {
      const double g = self->grad[i] / hw;
      double* gx = xn->grad.data() + static_cast<std::ptrdiff_t>(i) * hw;
      for (int j = 0; j < hw; ++j) gx[j] += g;
    }
  };
  return node;
}

NodeRef linear(const NodeRef& x, const NodeRef& w, const NodeRef& b) {
  if (x->value.rank() != 2 || w->value.rank() != 2)
    throw ShapeError("linear: x must be {N,F}, w must be {O,F}");
  const int n = x->value.dim(0), f = x->value.dim(1), o = w->value.dim(0);
  if (w->value.dim(1) != f || b->value.numel() != o) throw ShapeError("linear: shape mismatch");
  Tensor out({n, o});
  MapConstMat xm(x->value.data(), n, f);
  MapConstMat wm(w->value.data(), o, f);
  MapMat ym(out.data(), n, o);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < o; ++j) out[i * o + j] += b->value[j];
  auto node = make_op(std::move(out), {x, w, b});
  Node* self = node.get();
  Node* xn = x.get();
  Node* wn = w.get();
  Node* bn = b.get();
  node->backprop = [self, xn, wn, bn, n, f, o]() {
    MapConstMat gy(self->grad.data(), n, o);
    if (xn->requires_grad) {
      xn->ensure_grad();
      MapMat gx(xn->grad.data(), n, f);
      MapConstMat wm(wn->value.data(), o, f);
      gx.noalias() += gy * wm;
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      MapMat gw(wn->grad.data(), o, f);
      MapConstMat xm(xn->value.data(), n, f);
      gw.noalias() += gy.transpose() * xm;
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < o; ++j) bn->grad[j] += self->grad[i * o + j];
    }
  };
  return node;
}

NodeRef scale(const NodeRef& x, double s) {
  Tensor out = x->value;
  for (int i = 0; i < out.numel(); ++i) out[i] *= s;
  auto node = make_op(std::move(out), {x});
  Node* self = node.get();
  Node* xn = x.get();
  node->backprop = [self, xn, s]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int i = 0; i < self->grad.numel(); ++i) xn->grad[i] += s * self->grad[i];
  };
  return node;
}

NodeRef shift(const NodeRef& x, double s) {
  Tensor out = x->value;
  for (int i = 0; i < out.numel(); ++i) out[i] += s;
  auto node = make_op(std::move(out), {x});
  Node* self = node.get();
  Node* xn = x.get();
  node->backprop = [self, xn]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int i = 0; i < self->grad.numel(); ++i) xn->grad[i] += self->grad[i];
  };
  return node;
}

NodeRef group_norm(const NodeRef& x, const NodeRef& gamma, const NodeRef& beta, int groups,
                   double eps) {
  require_nchw(x->value, "group_norm");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
  if (groups < 1 || c % groups != 0) throw ShapeError("group_norm: channels must divide into groups");
  if (gamma->value.numel() != c || beta->value.numel() != c)
    throw ShapeError("group_norm: gamma/beta must have one entry per channel");
  const int cg = c / groups;       // channels per group
  const int m = cg * h * w;        // elements per group
  const int hw = h * w;

  Tensor out({n, c, h, w});
  auto xhat = std::make_shared<Tensor>(Tensor({n, c, h, w}));
  auto inv_std = std::make_shared<Tensor>(Tensor({n, groups}));
  for (int i = 0; i < n; ++i) {
    for (int g = 0; g < groups; ++g) {
      const std::ptrdiff_t base = (static_cast<std::ptrdiff_t>(i) * c + g * cg) * hw;
      const double* xv = x->value.data() + base;
      double mean = 0.0;
      for (int j = 0; j < m; ++j) mean += xv[j];
      mean /= m;
      double var = 0.0;
      for (int j = 0; j < m; ++j) var += (xv[j] - mean) * (xv[j] - mean);
      var /= m;
      const double istd = 1.0 / std::sqrt(var + eps);
      (*inv_std)[i * groups + g] = istd;
      double* xh = xhat->data() + base;
      double* ov = out.data() + base;
      for (int j = 0; j < m; ++j) {
        xh[j] = (xv[j] - mean) * istd;
        const int ch = g * cg + j / hw;
        ov[j] = gamma->value[ch] * xh[j] + beta->value[ch];
      }
    }
  }

  auto node = make_op(std::move(out), {x, gamma, beta});
  Node* self = node.get();
  Node* xn = x.get();
  Node* gn = gamma.get();
  Node* bn = beta.get();
  node->backprop = [self, xn, gn, bn, xhat, inv_std, n, c, hw, cg, groups, m]() {
    if (gn->requires_grad) gn->ensure_grad();
    if (bn->requires_grad) bn->ensure_grad();
    if (xn->requires_grad) xn->ensure_grad();
    for (int i = 0; i < n; ++i) {
      for (int g = 0; g < groups; ++g) {
        const std::ptrdiff_t base = (static_cast<std::ptrdiff_t>(i) * c + g * cg) * hw;
        const double* gy = self->grad.data() + base;
        const double* xh = xhat->data() + base;
        if (gn->requires_grad || bn->requires_grad) {
          for (int j = 0; j < m; ++j) {
            const int ch = g * cg + j / hw;
            if (gn->requires_grad) gn->grad[ch] += gy[j] * xh[j];
            if (bn->requires_grad) bn->grad[ch] += gy[j];
          }
        }
        if (!xn->requires_grad) continue;
        // dL/dxhat_j = gy_j * gamma; dx via the standard normalization backward
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < m; ++j) {
          const int ch = g * cg + j / hw;
          const double dxhat = gy[j] * gn->value[ch];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xh[j];
        }
        const double istd = (*inv_std)[i * groups + g];
        double* gx = xn->grad.data() + base;
        for (int j = 0; j < m; ++j) {
          const int ch = g * cg + j / hw;
          const double dxhat = gy[j] * gn->value[ch];
          gx[j] += istd * (dxhat - (sum_dxhat + xh[j] * sum_dxhat_xhat) / m);
        }
      }
    }
  };
  return node;
}

NodeRef softmax_cross_entropy(const NodeRef& logits, const std::vector<int>& labels) {
  if (logits->value.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be {N,K}");
  const int n = logits->value.dim(0), k = logits->value.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw ShapeError("softmax_cross_entropy: labels size mismatch");
  auto probs = std::make_shared<Tensor>(Tensor({n, k}));
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = logits->value.data() + static_cast<std::ptrdiff_t>(i) * k;
    double m = row[0];
    for (int j = 1; j < k; ++j) m = std::max(m, row[j]);
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(row[j] - m);
    const double lse = m + std::log(denom);
    for (int j = 0; j < k; ++j) (*probs)[i * k + j] = std::exp(row[j] - lse);
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw ParameterError("softmax_cross_entropy: label out of range");
    loss += lse - row[y];
  }
  auto node = make_op(Tensor::scalar(loss / n), {logits});
  Node* self = node.get();
  Node* ln = logits.get();
  auto labels_copy = std::make_shared<std::vector<int>>(labels);
  node->backprop = [self, ln, probs, labels_copy, n, k]() {
    if (!ln->requires_grad) return;
    ln->ensure_grad();
    const double g = self->grad[0] / n;
    for (int i = 0; i < n; ++i) {
      const int y = (*labels_copy)[static_cast<std::size_t>(i)];
      for (int j = 0; j < k; ++j) {
        const double onehot = (j == y) ? 1.0 : 0.0;
        ln->grad[i * k + j] += g * ((*probs)[i * k + j] - onehot);
      }
    }
  };
  return node;
}

NodeRef cosine_to(const NodeRef& x, const Tensor& target) {
  const int c = x->value.numel();
  if (target.numel() != c) throw ShapeError("cosine_to: dimension mismatch");
  double xx = 0.0, tt = 0.0, xt = 0.0;
  for (int i = 0; i < c; ++i) {
    xx += x->value[i] * x->value[i];
    tt += target[i] * target[i];
    xt += x->value[i] * target[i];
  }
  if (xx <= 0.0 || tt <= 0.0) throw ParameterError("cosine_to: zero vector");
  const double nx = std::sqrt(xx), nt = std::sqrt(tt);
  const double cosv = xt / (nx * nt);
  auto node = make_op(Tensor::scalar(cosv), {x});
  Node* self = node.get();
  Node* xn = x.get();
  auto tcopy = std::make_shared<Tensor>(target);
  node->backprop = [self, xn, tcopy, nx, nt, cosv, c]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const double g = self->grad[0];
    for (int i = 0; i < c; ++i)
      xn->grad[i] += g * ((*tcopy)[i] / (nx * nt) - cosv * xn->value[i] / (nx * nx));
  };
  return node;
}

NodeRef weighted_bce_with_logits(const NodeRef& logits, const Tensor& targets,
                                 const Tensor& weights) {
  if (!logits->value.same_shape(targets) || !logits->value.same_shape(weights))
    throw ShapeError("weighted_bce_with_logits: shape mismatch");
  require_nchw(logits->value, "weighted_bce_with_logits");
  const int n = logits->value.dim(0);
  const int per = logits->value.numel() / n;  // C*H*W with C = 1
  double loss = 0.0;
  for (int i = 0; i < logits->value.numel(); ++i) {
    const double z = logits->value[i];
    const double m = targets[i];
    loss += weights[i] * (m * softplus(-z) + (1.0 - m) * softplus(z));
  }
  loss /= static_cast<double>(n) * per;
  auto node = make_op(Tensor::scalar(loss), {logits});
  Node* self = node.get();
  Node* ln = logits.get();
  auto t = std::make_shared<Tensor>(targets);
  auto wgt = std::make_shared<Tensor>(weights);
  node->backprop = [self, ln, t, wgt, n, per]() {
    if (!ln->requires_grad) return;
    ln->ensure_grad();
    const double g = self->grad[0] / (static_cast<double>(n) * per);
    for (int i = 0; i < ln->value.numel(); ++i) {
      const double s = sigmoid_scalar(ln->value[i]);
      ln->grad[i] += g * (*wgt)[i] * (s - (*t)[i]);
    }
  };
  return node;
}

NodeRef occlude(const NodeRef& x, const NodeRef& m, double fill) {
  require_nchw(x->value, "occlude");
  require_nchw(m->value, "occlude");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
  if (m->value.dim(0) != n || m->value.dim(1) != 1 || m->value.dim(2) != h || m->value.dim(3) != w)
    throw ShapeError("occlude: mask must be {N,1,H,W} matching the image");
  const int hw = h * w;
  Tensor out({n, c, h, w});
  for (int i = 0; i < n; ++i) {
    const double* mv = m->value.data() + static_cast<std::ptrdiff_t>(i) * hw;
    for (int ch = 0; ch < c; ++ch) {
      const double* xv = x->value.data() + (static_cast<std::ptrdiff_t>(i) * c + ch) * hw;
      double* ov = out.data() + (static_cast<std::ptrdiff_t>(i) * c + ch) * hw;
      for (int j = 0; j < hw; ++j) ov[j] = xv[j] * (1.0 - mv[j]) + fill * mv[j];
    }
  }
  auto node = make_op(std::move(out), {x, m});
  Node* self = node.get();
  Node* xn = x.get();
  Node* mn = m.get();
  node->backprop = [self, xn, mn, fill, n, c, hw]() {
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const double* mv = mn->value.data() + static_cast<std::ptrdiff_t>(i) * hw;
        for (int ch = 0; ch < c; ++ch) {
          const double* g = self->grad.data() + (static_cast<std::ptrdiff_t>(i) * c + ch) * hw;
          double* gx = xn->grad.data() + (static_cast<std::ptrdiff_t>(i) * c + ch) * hw;
          for (int j = 0; j < hw; ++j) gx[j] += g[j] * (1.0 - mv[j]);
        }
      }
    }
    if (mn->requires_grad) {
      mn->ensure_grad();
      for (int i = 0; i < n; ++i) {
        double* gm = mn->grad.data() + static_cast<std::ptrdiff_t>(i) * hw;
        for (int ch = 0; ch < c; ++ch) {
          const double* g = self->grad.data() + (static_cast<std::ptrdiff_t>(i) * c + ch) * hw;
          const double* xv = xn->value.data() + (static_cast<std::ptrdiff_t>(i) * c + ch) * hw;
          for (int j = 0; j < hw; ++j) gm[j] += g[j] * (fill - xv[j]);
        }
      }
    }
  };
  return node;
}

NodeRef custom_unary(const NodeRef& x, std::function<Tensor(const Tensor&)> fwd,
                     std::function<Tensor(const Tensor&, const Tensor&)> bwd) {
  Tensor out = fwd(x->value);
  auto node = make_op(std::move(out), {x});
  Node* self = node.get();
  Node* xn = x.get();
  auto bwd_fn = std::make_shared<std::function<Tensor(const Tensor&, const Tensor&)>>(std::move(bwd));
  node->backprop = [self, xn, bwd_fn]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    Tensor gx = (*bwd_fn)(xn->value, self->grad);
    if (!gx.same_shape(xn->grad)) throw ShapeError("custom_unary: backward shape mismatch");
    for (int i = 0; i < gx.numel(); ++i) xn->grad[i] += gx[i];
  };
  return node;
}

}  // namespace radap::nn
