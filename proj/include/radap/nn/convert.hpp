#pragma once

#include <span>

#include "radap/core/field.hpp"
#include "radap/core/image.hpp"
#include "radap/nn/tensor.hpp"

namespace radap::nn {

inline Tensor tensor_from_images(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("tensor_from_images: empty batch");
  const int n = static_cast<int>(images.size());
  const int h = images[0].height();
  const int w = images[0].width();
  Tensor t({n, 3, h, w});
  for (int i = 0; i < n; ++i) {
    if (images[static_cast<std::size_t>(i)].height() != h ||
        images[static_cast<std::size_t>(i)].width() != w)
      throw ShapeError("tensor_from_images: inconsistent shapes");
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          t[((i * 3 + c) * h + y) * w + x] = images[static_cast<std::size_t>(i)].at(c, y, x);
  }
  return t;
}

inline Tensor tensor_from_image(const Image& image) {
  return tensor_from_images(std::span<const Image>(&image, 1));
}

inline Image image_from_tensor(const Tensor& t, int batch_index = 0) {
  if (t.rank() != 4 || t.dim(1) != 3) throw ShapeError("image_from_tensor: expected {N,3,H,W}");
  const int h = t.dim(2), w = t.dim(3);
  Image image(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        image.at(c, y, x) = t[((batch_index * 3 + c) * h + y) * w + x];
  return image;
}

inline Tensor tensor_from_mask(const BinaryMask& mask) {
  const int h = mask.height(), w = mask.width();
  Tensor t({1, 1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) t[y * w + x] = static_cast<double>(mask.values(y, x));
  return t;
}

inline Field field_from_tensor_plane(const Tensor& t, int batch_index = 0, int channel = 0) {
  if (t.rank() != 4) throw ShapeError("field_from_tensor_plane: expected rank-4 tensor");
  const int h = t.dim(2), w = t.dim(3);
  Field f(h, w);
  const int base = (batch_index * t.dim(1) + channel) * h * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) f(y, x) = t[base + y * w + x];
  return f;
}

}  // namespace radap::nn
