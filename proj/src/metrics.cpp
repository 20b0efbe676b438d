#include "moire/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

namespace moire::metrics {

namespace {

constexpr std::size_t kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWin> gaussian() {
  std::array<double, kWin> g{};
  double sum = 0.0;
  for (std::size_t i = 0; i < kWin; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(kWin / 2);
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Valid-mode separable Gaussian filter of an h x w plane.
std::vector<double> blur(const std::vector<double>& p, std::size_t h, std::size_t w) {
  static const auto g = gaussian();
  const std::size_t oh = h - kWin + 1, ow = w - kWin + 1;
  std::vector<double> rows(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWin; ++k) acc += g[k] * p[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWin; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": " + a.shape().str() + " vs " + b.shape().str());
  }
  if (a.empty()) throw Error(ErrorCode::ShapeMismatch, std::string(what) + " of empty tensors");
}

}  // namespace

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "psnr");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(a.numel()) / sum);
}

template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "ssim");
  const std::size_t h = a.h(), w = a.w();
  if (h < kWin || w < kWin) {
    throw Error(ErrorCode::MinSizeViolation, "ssim needs at least 11x11 pixels, got " + a.shape().str());
  }
  const std::size_t hw = h * w;
  double total = 0.0;
  std::size_t planes = 0;
  for (std::size_t n = 0; n < a.n(); ++n)
    for (std::size_t c = 0; c < a.c(); ++c) {
      const T* pa = a.plane(n, c);
      const T* pb = b.plane(n, c);
      std::vector<double> x(hw), y(hw), xx(hw), yy(hw), xy(hw);
      for (std::size_t i = 0; i < hw; ++i) {
        x[i] = pa[i];
        y[i] = pb[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
      const auto mx = blur(x, h, w), my = blur(y, h, w);
      const auto exx = blur(xx, h, w), eyy = blur(yy, h, w), exy = blur(xy, h, w);
      double sum = 0.0;
      for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = exx[i] - mx[i] * mx[i];
        const double vy = eyy[i] - my[i] * my[i];
        const double cxy = exy[i] - mx[i] * my[i];
        sum += ((2 * mx[i] * my[i] + kC1) * (2 * cxy + kC2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
      }
      total += sum / static_cast<double>(mx.size());
      ++planes;
    }
  return total / static_cast<double>(planes);
}

std::string format_db(double db, int digits) {
  if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, db);
  return buf;
}

template double psnr(const Tensor<float>&, const Tensor<float>&);
template double psnr(const Tensor<double>&, const Tensor<double>&);
template double ssim(const Tensor<float>&, const Tensor<float>&);
template double ssim(const Tensor<double>&, const Tensor<double>&);

}  // namespace moire::metrics
