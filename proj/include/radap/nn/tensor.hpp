#pragma once

#include <numeric>
#include <vector>

#include "radap/core/errors.hpp"

namespace radap::nn {

// Dense row-major tensor of doubles; NCHW for image-shaped data.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
    v_.assign(numel_of(dims_), 0.0);
  }
  Tensor(std::vector<int> dims, std::vector<double> data)
      : dims_(std::move(dims)), v_(std::move(data)) {
    if (v_.size() != numel_of(dims_)) throw ShapeError("tensor data does not match dims");
  }

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  int numel() const { return static_cast<int>(v_.size()); }
  int rank() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& dims() const { return dims_; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double& operator[](int i) { return v_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v_[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }
  bool empty() const { return v_.empty(); }

  void fill(double v) { std::fill(v_.begin(), v_.end(), v); }

 private:
  static std::size_t numel_of(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) {
      if (d <= 0) throw ShapeError("tensor dims must be positive");
      n *= static_cast<std::size_t>(d);
    }
    return dims.empty() ? 0 : n;
  }

  std::vector<int> dims_;
  std::vector<double> v_;
};

}  // namespace radap::nn
