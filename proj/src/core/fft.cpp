#include "radap/core/fft.hpp"

#include <unsupported/Eigen/FFT>
#include <vector>

#include "radap/core/errors.hpp"

namespace radap::core {

namespace {

enum class Direction { forward, inverse };

// Row-column decomposition over a per-call FFT object; kissfft plans are
// cheap at the sizes used here and this keeps concurrent callers independent.
ComplexField transform2d(const ComplexField& in, Direction dir) {
  const int h = static_cast<int>(in.rows());
  const int w = static_cast<int>(in.cols());
  if (h <= 0 || w <= 0) throw ShapeError("fft input must be non-empty");

  Eigen::FFT<double> fft;
  ComplexField out = in;
  std::vector<std::complex<double>> line;

  line.resize(static_cast<std::size_t>(w));
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) line[static_cast<std::size_t>(x)] = out(y, x);
    if (dir == Direction::forward)
      fft.fwd(spec.data(), line.data(), w);
    else
      fft.inv(spec.data(), line.data(), w);
    for (int x = 0; x < w; ++x) out(y, x) = spec[static_cast<std::size_t>(x)];
  }

  line.resize(static_cast<std::size_t>(h));
  spec.resize(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) line[static_cast<std::size_t>(y)] = out(y, x);
    if (dir == Direction::forward)
      fft.fwd(spec.data(), line.data(), h);
    else
      fft.inv(spec.data(), line.data(), h);
    for (int y = 0; y < h; ++y) out(y, x) = spec[static_cast<std::size_t>(y)];
  }
  return out;
}

}  // namespace

ComplexField dft2d(const ComplexField& in) { return transform2d(in, Direction::forward); }

ComplexField idft2d(const ComplexField& in) { return transform2d(in, Direction::inverse); }

Eigen::ArrayXd fft_frequencies(int n) {
  if (n <= 0) throw ShapeError("fft_frequencies needs n > 0");
  Eigen::ArrayXd f(n);
  const int half = (n + 1) / 2;  // number of non-negative bins
  for (int i = 0; i < half; ++i) f(i) = static_cast<double>(i) / n;
  for (int i = half; i < n; ++i) f(i) = static_cast<double>(i - n) / n;
  return f;
}

}  // namespace radap::core
