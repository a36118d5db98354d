#pragma once

#include <array>

#include "radap/core/field.hpp"

namespace radap {

// H x W x 3 image with values in [0, 1], stored as planar channels.
struct Image {
  std::array<Field, 3> ch;

  Image() = default;
  Image(int height, int width) {
    for (auto& c : ch) c = Field::Zero(height, width);
  }

  int height() const { return static_cast<int>(ch[0].rows()); }
  int width() const { return static_cast<int>(ch[0].cols()); }

  double& at(int c, int y, int x) { return ch[static_cast<std::size_t>(c)](y, x); }
  double at(int c, int y, int x) const { return ch[static_cast<std::size_t>(c)](y, x); }

  void clamp01() {
    for (auto& c : ch) c = c.min(1.0).max(0.0);
  }

  double max_abs_diff(const Image& other) const {
    double m = 0.0;
    for (int c = 0; c < 3; ++c) m = std::max(m, (ch[c] - other.ch[c]).abs().maxCoeff());
    return m;
  }

  bool same_shape(const Image& other) const {
    return height() == other.height() && width() == other.width();
  }
};

}  // namespace radap
