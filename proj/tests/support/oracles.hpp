#pragma once

// Independent loop-nest oracles shared by the unit and acceptance tests.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "moire/dirconv.hpp"
#include "moire/rng.hpp"

namespace oracle {

using moire::Shape;
using moire::Tensor;

// Direct cross-correlation with zero padding, accumulated in double.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad, int groups) {
  const std::size_t cout = w.n(), cgin = w.c(), kh = w.h(), kw = w.w();
  const std::size_t oh = (x.h() + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (x.w() + 2 * pad - kw) / stride + 1;
  const std::size_t cgout = cout / groups;
  Tensor<T> out(Shape{x.n(), cout, oh, ow});
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = b.empty() ? 0.0 : static_cast<double>(b[o]);
          const std::size_t g = o / cgout;
          for (std::size_t i = 0; i < cgin; ++i)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long sy = static_cast<long>(y * stride + ky) - pad;
                const long sx = static_cast<long>(xx * stride + kx) - pad;
                if (sy < 0 || sx < 0 || sy >= static_cast<long>(x.h()) || sx >= static_cast<long>(x.w())) continue;
                acc += static_cast<double>(w(o, i, ky, kx)) * x(n, g * cgin + i, sy, sx);
              }
          out(n, o, y, xx) = static_cast<T>(acc);
        }
  return out;
}

template <typename T>
double inner(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

template <typename T>
double max_abs(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

template <typename T>
moire::dirconv::DacParams<T> random_dac(moire::Rng& rng, std::size_t cin, std::size_t cout) {
  moire::dirconv::DacParams<T> p;
  for (std::size_t k = 0; k < moire::dirconv::kBranchCount; ++k) {
    p.weights[k] = rng.uniform_tensor<T>(Shape{cout, cin, 3, 3}, -1, 1);
    p.biases[k] = rng.uniform_tensor<T>(Shape{1, cout, 1, 1}, -1, 1);
  }
  p.alpha = rng.uniform_tensor<T>(Shape{1, 5, 1, 1}, -1.5, 1.5);
  return p;
}

// Five separate convolutions, weighted and summed after the fact.
template <typename T>
Tensor<T> dac_branch_sum(const Tensor<T>& x, const moire::dirconv::DacParams<T>& p) {
  Tensor<T> out;
  for (std::size_t k = 0; k < moire::dirconv::kBranchCount; ++k) {
    const auto wk = moire::dirconv::branch_kernel(p.weights[k], static_cast<moire::dirconv::Branch>(k));
    const Tensor<T> yk = conv2d(x, wk, p.biases[k], 1, 1, 1);
    if (k == 0) out = Tensor<T>(yk.shape());
    for (std::size_t i = 0; i < yk.numel(); ++i) out[i] += p.alpha[k] * yk[i];
  }
  return out;
}

// Power spectrum |F(ky, kx)|^2 of an h x w plane by direct summation, after
// removing the mean and optionally applying a separable Hann window.
struct Spectrum {
  std::size_t h, w;
  std::vector<double> power;  // row-major over (ky, kx)

  double at(std::size_t ky, std::size_t kx) const { return power[ky * w + kx]; }
  // Signed frequency in cycles/px of bin k out of n.
  static double freq(std::size_t k, std::size_t n) {
    const double kk = k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    return kk / static_cast<double>(n);
  }
  double radius(std::size_t ky, std::size_t kx) const { return std::hypot(freq(ky, h), freq(kx, w)); }
  // Share of energy at radial frequencies below `cut`.
  double fraction_below(double cut) const {
    double total = 0.0, low = 0.0;
    for (std::size_t ky = 0; ky < h; ++ky)
      for (std::size_t kx = 0; kx < w; ++kx) {
        total += at(ky, kx);
        if (radius(ky, kx) < cut) low += at(ky, kx);
      }
    return total > 0.0 ? low / total : 0.0;
  }
};

inline Spectrum power_spectrum(const std::vector<double>& plane, std::size_t h, std::size_t w, bool hann) {
  constexpr double pi = std::numbers::pi;
  double mean = 0.0;
  for (double v : plane) mean += v;
  mean /= static_cast<double>(plane.size());
  std::vector<double> x(plane.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t c = 0; c < w; ++c) {
      double v = plane[y * w + c] - mean;
      if (hann) {
        v *= 0.5 - 0.5 * std::cos(2 * pi * (static_cast<double>(y) + 0.5) / static_cast<double>(h));
        v *= 0.5 - 0.5 * std::cos(2 * pi * (static_cast<double>(c) + 0.5) / static_cast<double>(w));
      }
      x[y * w + c] = v;
    }
  // Rows first, then columns.
  std::vector<std::complex<double>> rows(h * w), full(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t kx = 0; kx < w; ++kx) {
      std::complex<double> acc = 0.0;
      for (std::size_t c = 0; c < w; ++c)
        acc += x[y * w + c] * std::polar(1.0, -2 * pi * static_cast<double>(kx * c % w) / static_cast<double>(w));
      rows[y * w + kx] = acc;
    }
  Spectrum s{h, w, std::vector<double>(h * w)};
  for (std::size_t ky = 0; ky < h; ++ky)
    for (std::size_t kx = 0; kx < w; ++kx) {
      std::complex<double> acc = 0.0;
      for (std::size_t y = 0; y < h; ++y)
        acc += rows[y * w + kx] * std::polar(1.0, -2 * pi * static_cast<double>(ky * y % h) / static_cast<double>(h));
      s.power[ky * w + kx] = std::norm(acc);
    }
  return s;
}

// One channel of an image tensor as a double plane.
template <typename T>
std::vector<double> channel_plane(const Tensor<T>& img, std::size_t c) {
  std::vector<double> out(img.h() * img.w());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(img.plane(0, c)[i]);
  return out;
}

}  // namespace oracle
