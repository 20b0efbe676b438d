#pragma once

// Image quality measures on tensors with values in [0, 1] (peak 1.0).

#include <limits>
#include <string>

#include "moire/tensor.hpp"

namespace moire::metrics {

struct MetricReport {
  double psnr_db = 0.0;  // +inf for identical images
  double ssim = 0.0;
};

// 10 log10(1 / MSE) over every element. Throws ShapeMismatch.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// valid window positions only, averaged over positions, channels and batch.
// Throws ShapeMismatch, MinSizeViolation.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b);

// "inf" for the identical-image sentinel, otherwise fixed with `digits`.
std::string format_db(double db, int digits = 2);

}  // namespace moire::metrics
