#pragma once

#include <Eigen/Dense>
#include <complex>

namespace radap::core {

using ComplexField = Eigen::ArrayXXcd;

// 2-D DFT, no normalization on the forward transform.
ComplexField dft2d(const ComplexField& in);

// 2-D inverse DFT with the 1/(HW) factor.
ComplexField idft2d(const ComplexField& in);

// Standard DFT sample frequencies for n samples (cycles per sample):
// [0, 1, ..., ceil(n/2)-1, -floor(n/2), ..., -1] / n.
Eigen::ArrayXd fft_frequencies(int n);

}  // namespace radap::core
