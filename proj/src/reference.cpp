#include "moire/reference.hpp"

#include <algorithm>

namespace moire::reference {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ops::ConvGeometry g) {
  const Shape out = ops::conv2d_output_shape(x.shape(), weight.shape(), g);
  const std::size_t groups = static_cast<std::size_t>(g.groups);
  const std::size_t cg_in = weight.c();
  const std::size_t cg_out = weight.n() / groups;
  Tensor<T> y(out);
  for (std::size_t n = 0; n < out.n; ++n) {
    for (std::size_t co = 0; co < out.c; ++co) {
      const std::size_t grp = co / cg_out;
      for (std::size_t oy = 0; oy < out.h; ++oy) {
        for (std::size_t ox = 0; ox < out.w; ++ox) {
          double acc = bias.empty() ? 0.0 : double(bias[co]);
          for (std::size_t ci = 0; ci < cg_in; ++ci) {
            for (std::size_t ki = 0; ki < weight.h(); ++ki) {
              for (std::size_t kj = 0; kj < weight.w(); ++kj) {
                const long iy = static_cast<long>(oy) * g.stride - g.padding + static_cast<long>(ki);
                const long ix = static_cast<long>(ox) * g.stride - g.padding + static_cast<long>(kj);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(x.h()) || ix >= static_cast<long>(x.w())) continue;
                acc += double(weight(co, ci, ki, kj)) *
                       double(x(n, grp * cg_in + ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)));
              }
            }
          }
          y(n, co, oy, ox) = static_cast<T>(acc);
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ops::ConvGeometry g) {
  const Shape out = ops::conv_transpose2d_output_shape(x.shape(), weight.shape(), g);
  const std::size_t groups = static_cast<std::size_t>(g.groups);
  const std::size_t cg_in = weight.n() / groups;  // input channels per group
  const std::size_t cg_out = weight.c();
  std::vector<double> acc(out.numel(), 0.0);
  auto at = [&](std::size_t n, std::size_t c, std::size_t y, std::size_t xx) {
    return ((n * out.c + c) * out.h + y) * out.w + xx;
  };
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t ci = 0; ci < x.c(); ++ci) {
      const std::size_t grp = ci / cg_in;
      for (std::size_t iy = 0; iy < x.h(); ++iy) {
        for (std::size_t ix = 0; ix < x.w(); ++ix) {
          const double v = x(n, ci, iy, ix);
          for (std::size_t co = 0; co < cg_out; ++co) {
            for (std::size_t ki = 0; ki < weight.h(); ++ki) {
              for (std::size_t kj = 0; kj < weight.w(); ++kj) {
                const long oy = static_cast<long>(iy) * g.stride - g.padding + static_cast<long>(ki);
                const long ox = static_cast<long>(ix) * g.stride - g.padding + static_cast<long>(kj);
                if (oy < 0 || ox < 0 || oy >= static_cast<long>(out.h) || ox >= static_cast<long>(out.w)) continue;
                acc[at(n, grp * cg_out + co, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox))] +=
                    v * double(weight(ci, co, ki, kj));
              }
            }
          }
        }
      }
    }
  }
  Tensor<T> y(out);
  for (std::size_t n = 0; n < out.n; ++n)
    for (std::size_t c = 0; c < out.c; ++c)
      for (std::size_t i = 0; i < out.plane(); ++i)
        y.plane(n, c)[i] = static_cast<T>(acc[(n * out.c + c) * out.plane() + i] + (bias.empty() ? 0.0 : double(bias[c])));
  return y;
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  const auto rr = static_cast<std::size_t>(r);
  Tensor<T> y(Shape{x.n(), x.c() / (rr * rr), x.h() * rr, x.w() * rr});
  for (std::size_t n = 0; n < y.n(); ++n)
    for (std::size_t k = 0; k < y.c(); ++k)
      for (std::size_t oy = 0; oy < y.h(); ++oy)
        for (std::size_t ox = 0; ox < y.w(); ++ox)
          y(n, k, oy, ox) = x(n, k * rr * rr + (oy % rr) * rr + (ox % rr), oy / rr, ox / rr);
  return y;
}

template <typename T>
Tensor<T> channel_stats(const Tensor<T>& x) {
  Tensor<T> y(Shape{x.n(), 2, x.h(), x.w()});
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t yy = 0; yy < x.h(); ++yy)
      for (std::size_t xx = 0; xx < x.w(); ++xx) {
        T m = x(n, 0, yy, xx);
        double s = 0.0;
        for (std::size_t c = 0; c < x.c(); ++c) {
          m = std::max(m, x(n, c, yy, xx));
          s += x(n, c, yy, xx);
        }
        y(n, 0, yy, xx) = m;
        y(n, 1, yy, xx) = static_cast<T>(s / static_cast<double>(x.c()));
      }
  return y;
}

template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, ops::ConvGeometry);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, ops::ConvGeometry);
template Tensor<float> conv_transpose2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                        ops::ConvGeometry);
template Tensor<double> conv_transpose2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                         ops::ConvGeometry);
template Tensor<float> pixel_shuffle(const Tensor<float>&, int);
template Tensor<double> pixel_shuffle(const Tensor<double>&, int);
template Tensor<float> channel_stats(const Tensor<float>&);
template Tensor<double> channel_stats(const Tensor<double>&);

}  // namespace moire::reference
