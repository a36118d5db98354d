#pragma once

#include <Eigen/Dense>

#include "radap/core/errors.hpp"

namespace radap {

// H x W real field, row index = image row.
using Field = Eigen::ArrayXXd;
using IntField = Eigen::ArrayXXi;

enum class MaskOrigin { fmask, rmask, predefined, segmenter, saf };

// H x W field over {0, 1} marking the patch / occlusion region.
struct BinaryMask {
  IntField values;
  MaskOrigin origin = MaskOrigin::fmask;

  int height() const { return static_cast<int>(values.rows()); }
  int width() const { return static_cast<int>(values.cols()); }
  long ones_count() const { return static_cast<long>(values.sum()); }

  void check_binary() const {
    if (values.rows() <= 0 || values.cols() <= 0)
      throw ShapeError("binary mask must have positive dimensions");
    if (((values != 0) && (values != 1)).any())
      throw ShapeError("binary mask entries must be 0 or 1");
  }
};

// H x W real field in [0, 1].
struct GrayscaleField {
  Field values;

  int height() const { return static_cast<int>(values.rows()); }
  int width() const { return static_cast<int>(values.cols()); }
};

}  // namespace radap
