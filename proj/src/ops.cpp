#include "moire/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace moire {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && std::memcmp(a.ptr(), b.ptr(), a.numel() * sizeof(T)) == 0;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw Error(ErrorCode::ShapeMismatch, a.shape().str() + " vs " + b.shape().str());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

template bool bitwise_equal(const Tensor<float>&, const Tensor<float>&);
template bool bitwise_equal(const Tensor<double>&, const Tensor<double>&);
template double max_abs_diff(const Tensor<float>&, const Tensor<float>&);
template double max_abs_diff(const Tensor<double>&, const Tensor<double>&);

}  // namespace moire

namespace moire::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

using idx = std::ptrdiff_t;

struct ConvDims {
  std::size_t n, cin, h, w;       // input
  std::size_t cout, kh, kw;       // kernel
  std::size_t oh, ow;             // output
  std::size_t groups, cg_in, cg_out;
  int stride, pad;

  std::size_t k() const { return cg_in * kh * kw; }
  std::size_t ohw() const { return oh * ow; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

void check_geometry(ConvGeometry g) {
  if (g.stride < 1 || g.padding < 0 || g.groups < 1) {
    throw Error(ErrorCode::ShapeMismatch, "stride/groups must be >= 1 and padding >= 0");
  }
}

ConvDims conv_dims(const Shape& x, const Shape& w, ConvGeometry g) {
  check_geometry(g);
  const auto groups = static_cast<std::size_t>(g.groups);
  if (w.n % groups != 0 || x.c != w.c * groups) {
    throw Error(ErrorCode::ShapeMismatch, "conv input " + x.str() + " incompatible with kernel " + w.str() +
                                              " groups=" + std::to_string(g.groups));
  }
  const std::size_t ph = x.h + 2 * static_cast<std::size_t>(g.padding);
  const std::size_t pw = x.w + 2 * static_cast<std::size_t>(g.padding);
  if (ph < w.h || pw < w.w) {
    throw Error(ErrorCode::EmptyOutput, "kernel " + w.str() + " larger than padded input " + x.str());
  }
  const auto s = static_cast<std::size_t>(g.stride);
  return ConvDims{x.n, x.c, x.h, x.w, w.n, w.h, w.w, (ph - w.h) / s + 1, (pw - w.w) / s + 1,
                  groups, w.c, w.n / groups, g.stride, g.padding};
}

// Output columns [lo, hi) whose input column ox*stride + off lies inside [0, w).
std::pair<std::size_t, std::size_t> valid_columns(idx off, int stride, std::size_t w, std::size_t ow) {
  const idx s = stride;
  const idx lo = off >= 0 ? 0 : (-off + s - 1) / s;
  const idx last = static_cast<idx>(w) - 1 - off;  // largest ox*s allowed
  const idx hi = last < 0 ? 0 : std::min<idx>(static_cast<idx>(ow), last / s + 1);
  return {static_cast<std::size_t>(std::min<idx>(lo, hi)), static_cast<std::size_t>(hi)};
}

// Unfolds channels [0, cg_in) of `x` (already offset to the group) into a
// (cg_in*kh*kw, oh*ow) matrix.
template <typename T>
void im2col(const T* x, const ConvDims& d, T* cols) {
  const std::size_t ohw = d.ohw();
  for (std::size_t kj = 0; kj < d.kw; ++kj) {
    const idx off = static_cast<idx>(kj) - d.pad;
    const auto [lo, hi] = valid_columns(off, d.stride, d.w, d.ow);
    for (std::size_t c = 0; c < d.cg_in; ++c) {
      const T* src = x + c * d.h * d.w;
      for (std::size_t ki = 0; ki < d.kh; ++ki) {
        T* dst = cols + ((c * d.kh + ki) * d.kw + kj) * ohw;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const idx iy = static_cast<idx>(oy) * d.stride - d.pad + static_cast<idx>(ki);
          T* row = dst + oy * d.ow;
          if (iy < 0 || iy >= static_cast<idx>(d.h)) {
            std::fill(row, row + d.ow, T(0));
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(iy) * d.w;
          std::fill(row, row + lo, T(0));
          if (d.stride == 1) {
            std::copy(srow + (static_cast<idx>(lo) + off), srow + (static_cast<idx>(hi) + off), row + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) row[ox] = srow[static_cast<idx>(ox) * d.stride + off];
          }
          std::fill(row + hi, row + d.ow, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates `cols` back into `x`.
template <typename T>
void col2im(const T* cols, const ConvDims& d, T* x) {
  const std::size_t ohw = d.ohw();
  for (std::size_t c = 0; c < d.cg_in; ++c) {
    T* dst = x + c * d.h * d.w;
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        const idx off = static_cast<idx>(kj) - d.pad;
        const auto [lo, hi] = valid_columns(off, d.stride, d.w, d.ow);
        const T* src = cols + ((c * d.kh + ki) * d.kw + kj) * ohw;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const idx iy = static_cast<idx>(oy) * d.stride - d.pad + static_cast<idx>(ki);
          if (iy < 0 || iy >= static_cast<idx>(d.h)) continue;
          T* drow = dst + static_cast<std::size_t>(iy) * d.w;
          const T* row = src + oy * d.ow;
          for (std::size_t ox = lo; ox < hi; ++ox) drow[static_cast<idx>(ox) * d.stride + off] += row[ox];
        }
      }
    }
  }
}

// Depthwise-style groups (one input and one output channel per group) run as
// a direct stencil; the GEMM path would be a 1 x k product per plane.
template <typename T>
void direct_single_channel(const T* x, const T* kernel, T bias, const ConvDims& d, T* out) {
  if (d.stride == 1) {
    for (std::size_t oy = 0; oy < d.oh; ++oy) {
      T* orow = out + oy * d.ow;
      std::fill(orow, orow + d.ow, bias);
      for (std::size_t ki = 0; ki < d.kh; ++ki) {
        const idx iy = static_cast<idx>(oy) - d.pad + static_cast<idx>(ki);
        if (iy < 0 || iy >= static_cast<idx>(d.h)) continue;
        const T* srow = x + static_cast<std::size_t>(iy) * d.w;
        for (std::size_t kj = 0; kj < d.kw; ++kj) {
          const idx off = static_cast<idx>(kj) - d.pad;
          const auto [lo, hi] = valid_columns(off, 1, d.w, d.ow);
          const T kv = kernel[ki * d.kw + kj];
          const T* src = srow + off;
          for (std::size_t ox = lo; ox < hi; ++ox) orow[ox] += kv * src[ox];
        }
      }
    }
    return;
  }
  for (std::size_t oy = 0; oy < d.oh; ++oy) {
    for (std::size_t ox = 0; ox < d.ow; ++ox) {
      T acc = T(0);
      for (std::size_t ki = 0; ki < d.kh; ++ki) {
        const idx iy = static_cast<idx>(oy) * d.stride - d.pad + static_cast<idx>(ki);
        if (iy < 0 || iy >= static_cast<idx>(d.h)) continue;
        for (std::size_t kj = 0; kj < d.kw; ++kj) {
          const idx ix = static_cast<idx>(ox) * d.stride - d.pad + static_cast<idx>(kj);
          if (ix < 0 || ix >= static_cast<idx>(d.w)) continue;
          acc += kernel[ki * d.kw + kj] * x[static_cast<std::size_t>(iy) * d.w + static_cast<std::size_t>(ix)];
        }
      }
      out[oy * d.ow + ox] = acc + bias;
    }
  }
}

template <typename T>
void check_bias(const Tensor<T>& bias, std::size_t cout) {
  if (!bias.empty() && bias.numel() != cout) {
    throw Error(ErrorCode::ShapeMismatch, "bias has " + std::to_string(bias.numel()) + " values, expected " +
                                              std::to_string(cout));
  }
}

template <typename T>
void add_bias(Tensor<T>& y, const Tensor<T>& bias) {
  if (bias.empty()) return;
  const std::size_t planes = y.n() * y.c();
  const std::size_t hw = y.shape().plane();
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const T b = bias[static_cast<std::size_t>(p) % y.c()];
    T* row = y.ptr() + static_cast<std::size_t>(p) * hw;
    for (std::size_t i = 0; i < hw; ++i) row[i] += b;
  }
}

// y(n, g) = W_g * cols(x(n, g)) for every batch item and group.
template <typename T>
void conv_forward_into(const Tensor<T>& x, const Tensor<T>& weight, const ConvDims& d, Tensor<T>& y) {
  const std::size_t jobs = d.n * d.groups;
  const std::size_t k = d.k();
  const std::size_t ohw = d.ohw();
#pragma omp parallel
  {
    std::vector<T> cols;
#pragma omp for schedule(static)
    for (idx job = 0; job < static_cast<idx>(jobs); ++job) {
      const std::size_t n = static_cast<std::size_t>(job) / d.groups;
      const std::size_t g = static_cast<std::size_t>(job) % d.groups;
      const T* xin = x.plane(n, g * d.cg_in);
      T* yout = y.plane(n, g * d.cg_out);
      const T* wg = weight.ptr() + g * d.cg_out * k;
      if (d.cg_in == 1 && d.cg_out == 1) {
        direct_single_channel(xin, wg, T(0), d, yout);
        continue;
      }
      const T* colp = xin;
      if (!d.pointwise()) {
        cols.resize(k * ohw);
        im2col(xin, d, cols.data());
        colp = cols.data();
      }
      MapMat<T>(yout, static_cast<idx>(d.cg_out), static_cast<idx>(ohw)).noalias() =
          ConstMapMat<T>(wg, static_cast<idx>(d.cg_out), static_cast<idx>(k)) *
          ConstMapMat<T>(colp, static_cast<idx>(k), static_cast<idx>(ohw));
    }
  }
}

// gx(n, g) = col2im(W_g^T * gy(n, g))
template <typename T>
void conv_grad_input_into(const Tensor<T>& gy, const Tensor<T>& weight, const ConvDims& d, Tensor<T>& gx) {
  const std::size_t jobs = d.n * d.groups;
  const std::size_t k = d.k();
  const std::size_t ohw = d.ohw();
#pragma omp parallel
  {
    std::vector<T> cols;
#pragma omp for schedule(static)
    for (idx job = 0; job < static_cast<idx>(jobs); ++job) {
      const std::size_t n = static_cast<std::size_t>(job) / d.groups;
      const std::size_t g = static_cast<std::size_t>(job) % d.groups;
      const T* gyg = gy.plane(n, g * d.cg_out);
      T* gxg = gx.plane(n, g * d.cg_in);
      const T* wg = weight.ptr() + g * d.cg_out * k;
      auto wmat = ConstMapMat<T>(wg, static_cast<idx>(d.cg_out), static_cast<idx>(k));
      auto gymat = ConstMapMat<T>(gyg, static_cast<idx>(d.cg_out), static_cast<idx>(ohw));
      if (d.pointwise()) {
        MapMat<T>(gxg, static_cast<idx>(k), static_cast<idx>(ohw)).noalias() = wmat.transpose() * gymat;
        continue;
      }
      cols.resize(k * ohw);
      MapMat<T>(cols.data(), static_cast<idx>(k), static_cast<idx>(ohw)).noalias() = wmat.transpose() * gymat;
      std::fill(gxg, gxg + d.cg_in * d.h * d.w, T(0));
      col2im(cols.data(), d, gxg);
    }
  }
}

// (cout, cg_in, kh, kw) -> (cin, cg_out, kh, kw) with both spatial axes reversed.
template <typename T>
Tensor<T> flip_transpose(const Tensor<T>& weight, const ConvDims& d) {
  Tensor<T> f(Shape{d.cin, d.cg_out, d.kh, d.kw});
  const std::size_t kk = d.kh * d.kw;
  for (std::size_t g = 0; g < d.groups; ++g) {
    for (std::size_t co = 0; co < d.cg_out; ++co) {
      for (std::size_t ci = 0; ci < d.cg_in; ++ci) {
        const T* src = weight.ptr() + ((g * d.cg_out + co) * d.cg_in + ci) * kk;
        T* dst = f.ptr() + ((g * d.cg_in + ci) * d.cg_out + co) * kk;
        for (std::size_t i = 0; i < kk; ++i) dst[i] = src[kk - 1 - i];
      }
    }
  }
  return f;
}

// Per-sample weight gradients are summed over the batch in index order.
template <typename T>
Tensor<T> conv_grad_weight_impl(const Tensor<T>& gy, const Tensor<T>& x, const Shape& wshape, const ConvDims& d) {
  const std::size_t k = d.k();
  const std::size_t ohw = d.ohw();
  const std::size_t wsize = wshape.numel();
  std::vector<T> partial(d.n * wsize, T(0));
  const std::size_t jobs = d.n * d.groups;
#pragma omp parallel
  {
    std::vector<T> cols;
#pragma omp for schedule(static)
    for (idx job = 0; job < static_cast<idx>(jobs); ++job) {
      const std::size_t n = static_cast<std::size_t>(job) / d.groups;
      const std::size_t g = static_cast<std::size_t>(job) % d.groups;
      const T* xin = x.plane(n, g * d.cg_in);
      const T* gyg = gy.plane(n, g * d.cg_out);
      T* dw = partial.data() + n * wsize + g * d.cg_out * k;
      const T* colp = xin;
      if (!d.pointwise()) {
        cols.resize(k * ohw);
        im2col(xin, d, cols.data());
        colp = cols.data();
      }
      MapMat<T>(dw, static_cast<idx>(d.cg_out), static_cast<idx>(k)).noalias() =
          ConstMapMat<T>(gyg, static_cast<idx>(d.cg_out), static_cast<idx>(ohw)) *
          ConstMapMat<T>(colp, static_cast<idx>(k), static_cast<idx>(ohw)).transpose();
    }
  }
  Tensor<T> gw(wshape);
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* src = partial.data() + n * wsize;
    for (std::size_t i = 0; i < wsize; ++i) gw[i] += src[i];
  }
  return gw;
}

void check_same(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": " + a.str() + " vs " + b.str());
}

}  // namespace

Shape conv2d_output_shape(const Shape& x, const Shape& weight, ConvGeometry g) {
  const ConvDims d = conv_dims(x, weight, g);
  return Shape{d.n, d.cout, d.oh, d.ow};
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ConvGeometry g) {
  const ConvDims d = conv_dims(x.shape(), weight.shape(), g);
  check_bias(bias, d.cout);
  Tensor<T> y(Shape{d.n, d.cout, d.oh, d.ow});
  conv_forward_into(x, weight, d, y);
  add_bias(y, bias);
  return y;
}

template <typename T>
Tensor<T> conv2d_grad_input(const Tensor<T>& grad_out, const Tensor<T>& weight, const Shape& x_shape,
                            ConvGeometry g) {
  const ConvDims d = conv_dims(x_shape, weight.shape(), g);
  check_same(grad_out.shape(), Shape{d.n, d.cout, d.oh, d.ow}, "conv2d grad_out");
  Tensor<T> gx(x_shape);
  if (d.stride == 1 && d.kh == d.kw && d.pad < static_cast<int>(d.kh) && !d.pointwise()) {
    // A stride-1 input gradient is a convolution of grad_out with the
    // spatially flipped, group-transposed kernel.
    const int pad = static_cast<int>(d.kh) - 1 - d.pad;
    const Tensor<T> flipped = flip_transpose(weight, d);
    conv_forward_into(grad_out, flipped, conv_dims(grad_out.shape(), flipped.shape(), {1, pad, g.groups}), gx);
    return gx;
  }
  conv_grad_input_into(grad_out, weight, d, gx);
  return gx;
}

template <typename T>
Tensor<T> conv2d_grad_weight(const Tensor<T>& grad_out, const Tensor<T>& x, const Shape& weight_shape,
                             ConvGeometry g) {
  const ConvDims d = conv_dims(x.shape(), weight_shape, g);
  check_same(grad_out.shape(), Shape{d.n, d.cout, d.oh, d.ow}, "conv2d grad_out");
  return conv_grad_weight_impl(grad_out, x, weight_shape, d);
}

template <typename T>
Tensor<T> bias_grad(const Tensor<T>& grad_out) {
  Tensor<T> gb(Shape{1, grad_out.c(), 1, 1});
  const std::size_t hw = grad_out.shape().plane();
#pragma omp parallel for schedule(static)
  for (idx c = 0; c < static_cast<idx>(grad_out.c()); ++c) {
    double acc = 0.0;
    for (std::size_t n = 0; n < grad_out.n(); ++n) {
      const T* p = grad_out.plane(n, static_cast<std::size_t>(c));
      for (std::size_t i = 0; i < hw; ++i) acc += p[i];
    }
    gb[static_cast<std::size_t>(c)] = static_cast<T>(acc);
  }
  return gb;
}

Shape conv_transpose2d_output_shape(const Shape& x, const Shape& weight, ConvGeometry g) {
  check_geometry(g);
  const auto groups = static_cast<std::size_t>(g.groups);
  if (x.c != weight.n || weight.n % groups != 0) {
    throw Error(ErrorCode::ShapeMismatch, "conv_transpose input " + x.str() + " incompatible with kernel " +
                                              weight.str());
  }
  const auto s = static_cast<std::size_t>(g.stride);
  const auto p2 = 2 * static_cast<std::size_t>(g.padding);
  if (x.h == 0 || x.w == 0 || (x.h - 1) * s + weight.h <= p2 || (x.w - 1) * s + weight.w <= p2) {
    throw Error(ErrorCode::EmptyOutput, "conv_transpose output would be empty");
  }
  return Shape{x.n, weight.c * groups, (x.h - 1) * s + weight.h - p2, (x.w - 1) * s + weight.w - p2};
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ConvGeometry g) {
  const Shape out = conv_transpose2d_output_shape(x.shape(), weight.shape(), g);
  check_bias(bias, out.c);
  const ConvDims d = conv_dims(out, weight.shape(), g);
  if (d.oh != x.h() || d.ow != x.w()) {
    throw Error(ErrorCode::ShapeMismatch, "conv_transpose geometry does not invert");
  }
  Tensor<T> y(out);
  conv_grad_input_into(x, weight, d, y);
  add_bias(y, bias);
  return y;
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  if (r < 1) throw Error(ErrorCode::ChannelNotDivisible, "factor must be >= 1");
  const auto rr = static_cast<std::size_t>(r);
  if (x.c() % (rr * rr) != 0) {
    throw Error(ErrorCode::ChannelNotDivisible, std::to_string(x.c()) + " channels, factor " + std::to_string(r));
  }
  const std::size_t oc = x.c() / (rr * rr);
  Tensor<T> y(Shape{x.n(), oc, x.h() * rr, x.w() * rr});
  const std::size_t planes = x.n() * oc;
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const std::size_t n = static_cast<std::size_t>(p) / oc;
    const std::size_t k = static_cast<std::size_t>(p) % oc;
    for (std::size_t i = 0; i < rr; ++i) {
      for (std::size_t j = 0; j < rr; ++j) {
        const T* src = x.plane(n, k * rr * rr + i * rr + j);
        for (std::size_t yy = 0; yy < x.h(); ++yy) {
          for (std::size_t xx = 0; xx < x.w(); ++xx) y(n, k, yy * rr + i, xx * rr + j) = src[yy * x.w() + xx];
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r) {
  if (r < 1) throw Error(ErrorCode::SpatialNotDivisible, "factor must be >= 1");
  const auto rr = static_cast<std::size_t>(r);
  if (x.h() % rr != 0 || x.w() % rr != 0) {
    throw Error(ErrorCode::SpatialNotDivisible, x.shape().str() + " factor " + std::to_string(r));
  }
  const std::size_t oh = x.h() / rr;
  const std::size_t ow = x.w() / rr;
  Tensor<T> y(Shape{x.n(), x.c() * rr * rr, oh, ow});
  const std::size_t planes = x.n() * x.c();
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const std::size_t n = static_cast<std::size_t>(p) / x.c();
    const std::size_t k = static_cast<std::size_t>(p) % x.c();
    for (std::size_t i = 0; i < rr; ++i) {
      for (std::size_t j = 0; j < rr; ++j) {
        T* dst = y.plane(n, k * rr * rr + i * rr + j);
        for (std::size_t yy = 0; yy < oh; ++yy) {
          for (std::size_t xx = 0; xx < ow; ++xx) dst[yy * ow + xx] = x(n, k, yy * rr + i, xx * rr + j);
        }
      }
    }
  }
  return y;
}

namespace {
void check_pool(const Shape& s, int k, int st) {
  if (k < 1 || st < 1) throw Error(ErrorCode::EmptyOutput, "pool window and stride must be >= 1");
  if (static_cast<std::size_t>(k) > s.h || static_cast<std::size_t>(k) > s.w) {
    throw Error(ErrorCode::EmptyOutput, "pool window " + std::to_string(k) + " exceeds " + s.str());
  }
}
}  // namespace

template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, int k, int s) {
  check_pool(x.shape(), k, s);
  const auto kk = static_cast<std::size_t>(k);
  const auto ss = static_cast<std::size_t>(s);
  const std::size_t oh = (x.h() - kk) / ss + 1;
  const std::size_t ow = (x.w() - kk) / ss + 1;
  Tensor<T> y(Shape{x.n(), x.c(), oh, ow});
  const std::size_t planes = x.n() * x.c();
  const T inv = T(1) / static_cast<T>(kk * kk);
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const T* src = x.ptr() + static_cast<std::size_t>(p) * x.shape().plane();
    T* dst = y.ptr() + static_cast<std::size_t>(p) * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T acc = kind == PoolKind::Max ? -std::numeric_limits<T>::infinity() : T(0);
        for (std::size_t i = 0; i < kk; ++i) {
          for (std::size_t j = 0; j < kk; ++j) {
            const T v = src[(oy * ss + i) * x.w() + ox * ss + j];
            acc = kind == PoolKind::Max ? std::max(acc, v) : acc + v;
          }
        }
        dst[oy * ow + ox] = kind == PoolKind::Max ? acc : acc * inv;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> pool2d_grad(const Tensor<T>& grad_out, const Tensor<T>& x, PoolKind kind, int k, int s) {
  check_pool(x.shape(), k, s);
  const auto kk = static_cast<std::size_t>(k);
  const auto ss = static_cast<std::size_t>(s);
  const std::size_t oh = grad_out.h();
  const std::size_t ow = grad_out.w();
  Tensor<T> gx(x.shape());
  const std::size_t planes = x.n() * x.c();
  const T inv = T(1) / static_cast<T>(kk * kk);
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const T* src = x.ptr() + static_cast<std::size_t>(p) * x.shape().plane();
    const T* g = grad_out.ptr() + static_cast<std::size_t>(p) * oh * ow;
    T* dst = gx.ptr() + static_cast<std::size_t>(p) * x.shape().plane();
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        if (kind == PoolKind::Avg) {
          for (std::size_t i = 0; i < kk; ++i)
            for (std::size_t j = 0; j < kk; ++j) dst[(oy * ss + i) * x.w() + ox * ss + j] += g[oy * ow + ox] * inv;
          continue;
        }
        std::size_t best = (oy * ss) * x.w() + ox * ss;
        for (std::size_t i = 0; i < kk; ++i) {
          for (std::size_t j = 0; j < kk; ++j) {
            const std::size_t at = (oy * ss + i) * x.w() + ox * ss + j;
            if (src[at] > src[best]) best = at;
          }
        }
        dst[best] += g[oy * ow + ox];
      }
    }
  }
  return gx;
}

template <typename T>
Tensor<T> channel_stats(const Tensor<T>& x) {
  if (x.c() < 1) throw Error(ErrorCode::ShapeMismatch, "channel_stats needs at least one channel");
  Tensor<T> y(Shape{x.n(), 2, x.h(), x.w()});
  const std::size_t hw = x.shape().plane();
  const double inv = 1.0 / static_cast<double>(x.c());
  for (std::size_t n = 0; n < x.n(); ++n) {
    T* mx = y.plane(n, 0);
    T* mean = y.plane(n, 1);
#pragma omp parallel for schedule(static)
    for (idx i = 0; i < static_cast<idx>(hw); ++i) {
      T m = x.plane(n, 0)[i];
      double acc = 0.0;
      for (std::size_t c = 0; c < x.c(); ++c) {
        const T v = x.plane(n, c)[i];
        m = std::max(m, v);
        acc += v;
      }
      mx[i] = m;
      mean[i] = static_cast<T>(acc * inv);
    }
  }
  return y;
}

template <typename T>
Tensor<T> channel_stats_grad(const Tensor<T>& grad_out, const Tensor<T>& x) {
  Tensor<T> gx(x.shape());
  const std::size_t hw = x.shape().plane();
  const T inv = T(1) / static_cast<T>(x.c());
  for (std::size_t n = 0; n < x.n(); ++n) {
    const T* gmax = grad_out.plane(n, 0);
    const T* gmean = grad_out.plane(n, 1);
#pragma omp parallel for schedule(static)
    for (idx i = 0; i < static_cast<idx>(hw); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < x.c(); ++c) {
        if (x.plane(n, c)[i] > x.plane(n, best)[i]) best = c;
      }
      const T share = gmean[i] * inv;
      for (std::size_t c = 0; c < x.c(); ++c) gx.plane(n, c)[i] = share;
      gx.plane(n, best)[i] += gmax[i];
    }
  }
  return gx;
}

namespace {
struct Tap {
  std::size_t i0, i1;
  double frac;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    auto i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = Tap{i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}
}  // namespace

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  if (out_h < 1 || out_w < 1) throw Error(ErrorCode::EmptyOutput, "resize target must be >= 1");
  if (x.h() < 1 || x.w() < 1) throw Error(ErrorCode::EmptyOutput, "resize source is empty");
  const auto ty = bilinear_taps(x.h(), out_h);
  const auto tx = bilinear_taps(x.w(), out_w);
  Tensor<T> y(Shape{x.n(), x.c(), out_h, out_w});
  const std::size_t planes = x.n() * x.c();
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const T* src = x.ptr() + static_cast<std::size_t>(p) * x.shape().plane();
    T* dst = y.ptr() + static_cast<std::size_t>(p) * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const T fy = static_cast<T>(ty[oy].frac);
      const T* r0 = src + ty[oy].i0 * x.w();
      const T* r1 = src + ty[oy].i1 * x.w();
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const T fx = static_cast<T>(tx[ox].frac);
        const T top = r0[tx[ox].i0] + fx * (r0[tx[ox].i1] - r0[tx[ox].i0]);
        const T bot = r1[tx[ox].i0] + fx * (r1[tx[ox].i1] - r1[tx[ox].i0]);
        dst[oy * out_w + ox] = top + fy * (bot - top);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> resize_bilinear_grad(const Tensor<T>& grad_out, const Shape& in_shape) {
  const std::size_t out_h = grad_out.h();
  const std::size_t out_w = grad_out.w();
  const auto ty = bilinear_taps(in_shape.h, out_h);
  const auto tx = bilinear_taps(in_shape.w, out_w);
  Tensor<T> gx(in_shape);
  const std::size_t planes = in_shape.n * in_shape.c;
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const T* g = grad_out.ptr() + static_cast<std::size_t>(p) * out_h * out_w;
    T* dst = gx.ptr() + static_cast<std::size_t>(p) * in_shape.plane();
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const T fy = static_cast<T>(ty[oy].frac);
      T* r0 = dst + ty[oy].i0 * in_shape.w;
      T* r1 = dst + ty[oy].i1 * in_shape.w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const T fx = static_cast<T>(tx[ox].frac);
        const T v = g[oy * out_w + ox];
        const T top = v * (T(1) - fy);
        const T bot = v * fy;
        r0[tx[ox].i0] += top * (T(1) - fx);
        r0[tx[ox].i1] += top * fx;
        r1[tx[ox].i0] += bot * (T(1) - fx);
        r1[tx[ox].i1] += bot * fx;
      }
    }
  }
  return gx;
}

template <typename T>
Tensor<T> ewise(const Tensor<T>& a, const Tensor<T>& b, Binary op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool broadcast = sb != sa && sb.n == sa.n && sb.c == 1 && sb.h == sa.h && sb.w == sa.w;
  if (sb != sa && !broadcast) {
    throw Error(ErrorCode::ShapeMismatch, "ewise " + sa.str() + " with " + sb.str());
  }
  Tensor<T> y(sa);
  const std::size_t hw = sa.plane();
  const std::size_t planes = sa.n * sa.c;
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const std::size_t n = static_cast<std::size_t>(p) / sa.c;
    const T* pa = a.ptr() + static_cast<std::size_t>(p) * hw;
    const T* pb = broadcast ? b.plane(n, 0) : b.ptr() + static_cast<std::size_t>(p) * hw;
    T* py = y.ptr() + static_cast<std::size_t>(p) * hw;
    switch (op) {
      case Binary::Add:
        for (std::size_t i = 0; i < hw; ++i) py[i] = pa[i] + pb[i];
        break;
      case Binary::Sub:
        for (std::size_t i = 0; i < hw; ++i) py[i] = pa[i] - pb[i];
        break;
      case Binary::Mul:
        for (std::size_t i = 0; i < hw; ++i) py[i] = pa[i] * pb[i];
        break;
    }
  }
  return y;
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation f) {
  Tensor<T> y(x.shape());
  const std::size_t total = x.numel();
  const T* src = x.ptr();
  T* dst = y.ptr();
  if (f == Activation::Relu) {
#pragma omp parallel for schedule(static)
    for (idx i = 0; i < static_cast<idx>(total); ++i) dst[i] = src[i] > T(0) ? src[i] : T(0);
  } else {
#pragma omp parallel for schedule(static)
    for (idx i = 0; i < static_cast<idx>(total); ++i) dst[i] = T(1) / (T(1) + std::exp(-src[i]));
  }
  return y;
}

template <typename T>
Tensor<T> activation_grad(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& y, Activation f) {
  Tensor<T> gx(x.shape());
  const std::size_t total = x.numel();
  if (f == Activation::Relu) {
#pragma omp parallel for schedule(static)
    for (idx i = 0; i < static_cast<idx>(total); ++i) gx[i] = x[i] > T(0) ? grad_out[i] : T(0);
  } else {
#pragma omp parallel for schedule(static)
    for (idx i = 0; i < static_cast<idx>(total); ++i) gx[i] = grad_out[i] * y[i] * (T(1) - y[i]);
  }
  return gx;
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& x, T s) {
  Tensor<T> y(x.shape());
  const std::size_t total = x.numel();
#pragma omp parallel for schedule(static)
  for (idx i = 0; i < static_cast<idx>(total); ++i) y[i] = x[i] * s;
  return y;
}

namespace {
bool broadcastable(const Shape& small, const Shape& big) {
  auto ok = [](std::size_t a, std::size_t b) { return a == b || a == 1; };
  return ok(small.n, big.n) && ok(small.c, big.c) && ok(small.h, big.h) && ok(small.w, big.w);
}
}  // namespace

template <typename T>
Tensor<T> expand(const Tensor<T>& x, const Shape& shape) {
  if (!broadcastable(x.shape(), shape)) {
    throw Error(ErrorCode::ShapeMismatch, "cannot expand " + x.shape().str() + " to " + shape.str());
  }
  Tensor<T> y(shape);
  const Shape& s = x.shape();
  const std::size_t planes = shape.n * shape.c;
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const std::size_t n = static_cast<std::size_t>(p) / shape.c;
    const std::size_t c = static_cast<std::size_t>(p) % shape.c;
    T* dst = y.plane(n, c);
    for (std::size_t yy = 0; yy < shape.h; ++yy) {
      for (std::size_t xx = 0; xx < shape.w; ++xx) {
        dst[yy * shape.w + xx] = x(s.n == 1 ? 0 : n, s.c == 1 ? 0 : c, s.h == 1 ? 0 : yy, s.w == 1 ? 0 : xx);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> reduce_to(const Tensor<T>& x, const Shape& shape) {
  if (!broadcastable(shape, x.shape())) {
    throw Error(ErrorCode::ShapeMismatch, "cannot reduce " + x.shape().str() + " to " + shape.str());
  }
  const Shape& s = x.shape();
  std::vector<double> acc(shape.numel(), 0.0);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      for (std::size_t yy = 0; yy < s.h; ++yy) {
        for (std::size_t xx = 0; xx < s.w; ++xx) {
          const std::size_t at = (((shape.n == 1 ? 0 : n) * shape.c + (shape.c == 1 ? 0 : c)) * shape.h + (shape.h == 1 ? 0 : yy)) * shape.w +
                                 (shape.w == 1 ? 0 : xx);
          acc[at] += src[yy * s.w + xx];
        }
      }
    }
  }
  Tensor<T> y(shape);
  for (std::size_t i = 0; i < acc.size(); ++i) y[i] = static_cast<T>(acc[i]);
  return y;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat of nothing");
  const Shape& first = parts.front()->shape();
  std::size_t c = 0;
  for (const auto* p : parts) {
    const Shape& s = p->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw Error(ErrorCode::ShapeMismatch, "concat " + first.str() + " with " + s.str());
    }
    c += s.c;
  }
  Tensor<T> y(Shape{first.n, c, first.h, first.w});
  const std::size_t hw = first.plane();
  for (std::size_t n = 0; n < first.n; ++n) {
    std::size_t at = 0;
    for (const auto* p : parts) {
      std::copy_n(p->plane(n, 0), p->c() * hw, y.plane(n, at));
      at += p->c();
    }
  }
  return y;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  std::vector<const Tensor<T>*> ptrs;
  ptrs.reserve(parts.size());
  for (const auto& p : parts) ptrs.push_back(&p);
  return concat_channels(ptrs);
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, const std::vector<std::size_t>& sizes) {
  std::size_t total = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw Error(ErrorCode::BadSplit, "zero-width split");
    total += s;
  }
  if (total != x.c()) {
    throw Error(ErrorCode::BadSplit, "split sizes sum to " + std::to_string(total) + ", have " +
                                         std::to_string(x.c()) + " channels");
  }
  std::vector<Tensor<T>> out;
  out.reserve(sizes.size());
  const std::size_t hw = x.shape().plane();
  std::size_t at = 0;
  for (std::size_t s : sizes) {
    Tensor<T> part(Shape{x.n(), s, x.h(), x.w()});
    for (std::size_t n = 0; n < x.n(); ++n) std::copy_n(x.plane(n, at), s * hw, part.plane(n, 0));
    out.push_back(std::move(part));
    at += s;
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::size_t point) {
  if (point == 0 || point >= x.c()) {
    throw Error(ErrorCode::BadSplit, "split point " + std::to_string(point) + " outside (0, " +
                                         std::to_string(x.c()) + ")");
  }
  return split_channels(x, std::vector<std::size_t>{point, x.c() - point});
}

namespace {
std::size_t reflect_index(idx i, std::size_t n) {
  if (i < 0) return static_cast<std::size_t>(-i);
  if (i >= static_cast<idx>(n)) return static_cast<std::size_t>(2 * static_cast<idx>(n) - 2 - i);
  return static_cast<std::size_t>(i);
}

void check_reflect(const Shape& s, Padding p) {
  if ((p.top > 0 || p.bottom > 0) && (p.top >= s.h || p.bottom >= s.h)) {
    throw Error(ErrorCode::BadPad, "vertical reflect pad must be < height " + std::to_string(s.h));
  }
  if ((p.left > 0 || p.right > 0) && (p.left >= s.w || p.right >= s.w)) {
    throw Error(ErrorCode::BadPad, "horizontal reflect pad must be < width " + std::to_string(s.w));
  }
}
}  // namespace

template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& x, Padding p) {
  check_reflect(x.shape(), p);
  const std::size_t oh = x.h() + p.top + p.bottom;
  const std::size_t ow = x.w() + p.left + p.right;
  Tensor<T> y(Shape{x.n(), x.c(), oh, ow});
  const std::size_t planes = x.n() * x.c();
#pragma omp parallel for schedule(static)
  for (idx q = 0; q < static_cast<idx>(planes); ++q) {
    const T* src = x.ptr() + static_cast<std::size_t>(q) * x.shape().plane();
    T* dst = y.ptr() + static_cast<std::size_t>(q) * oh * ow;
    for (std::size_t yy = 0; yy < oh; ++yy) {
      const std::size_t sy = reflect_index(static_cast<idx>(yy) - static_cast<idx>(p.top), x.h());
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const std::size_t sx = reflect_index(static_cast<idx>(xx) - static_cast<idx>(p.left), x.w());
        dst[yy * ow + xx] = src[sy * x.w() + sx];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> pad_reflect_grad(const Tensor<T>& grad_out, Padding p, const Shape& in_shape) {
  check_reflect(in_shape, p);
  Tensor<T> gx(in_shape);
  const std::size_t oh = grad_out.h();
  const std::size_t ow = grad_out.w();
  const std::size_t planes = in_shape.n * in_shape.c;
#pragma omp parallel for schedule(static)
  for (idx q = 0; q < static_cast<idx>(planes); ++q) {
    const T* src = grad_out.ptr() + static_cast<std::size_t>(q) * oh * ow;
    T* dst = gx.ptr() + static_cast<std::size_t>(q) * in_shape.plane();
    for (std::size_t yy = 0; yy < oh; ++yy) {
      const std::size_t sy = reflect_index(static_cast<idx>(yy) - static_cast<idx>(p.top), in_shape.h);
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const std::size_t sx = reflect_index(static_cast<idx>(xx) - static_cast<idx>(p.left), in_shape.w);
        dst[sy * in_shape.w + sx] += src[yy * ow + xx];
      }
    }
  }
  return gx;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  if (y0 + h > x.h() || x0 + w > x.w()) {
    throw Error(ErrorCode::BadPad, "crop window exceeds " + x.shape().str());
  }
  Tensor<T> y(Shape{x.n(), x.c(), h, w});
  const std::size_t planes = x.n() * x.c();
  for (std::size_t q = 0; q < planes; ++q) {
    const T* src = x.ptr() + q * x.shape().plane();
    T* dst = y.ptr() + q * h * w;
    for (std::size_t yy = 0; yy < h; ++yy) std::copy_n(src + (y0 + yy) * x.w() + x0, w, dst + yy * w);
  }
  return y;
}

template <typename T>
Tensor<T> crop_grad(const Tensor<T>& grad_out, std::size_t y0, std::size_t x0, const Shape& in_shape) {
  if (y0 + grad_out.h() > in_shape.h || x0 + grad_out.w() > in_shape.w) {
    throw Error(ErrorCode::BadPad, "crop window exceeds " + in_shape.str());
  }
  Tensor<T> gx(in_shape);
  const std::size_t planes = in_shape.n * in_shape.c;
  const std::size_t h = grad_out.h();
  const std::size_t w = grad_out.w();
  for (std::size_t q = 0; q < planes; ++q) {
    const T* src = grad_out.ptr() + q * h * w;
    T* dst = gx.ptr() + q * in_shape.plane();
    for (std::size_t yy = 0; yy < h; ++yy) std::copy_n(src + yy * w, w, dst + (y0 + yy) * in_shape.w + x0);
  }
  return gx;
}

Shape reduced_shape(const Shape& s, unsigned axes) {
  return Shape{(axes & AxisN) ? 1 : s.n, (axes & AxisC) ? 1 : s.c, (axes & AxisH) ? 1 : s.h, (axes & AxisW) ? 1 : s.w};
}

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, unsigned axes) {
  return reduce_to(x, reduced_shape(x.shape(), axes));
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, unsigned axes) {
  const Shape rs = reduced_shape(x.shape(), axes);
  const Shape& s = x.shape();
  std::vector<double> acc(rs.numel(), 0.0);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      for (std::size_t yy = 0; yy < s.h; ++yy) {
        for (std::size_t xx = 0; xx < s.w; ++xx) {
          const std::size_t at = ((((axes & AxisN) ? 0 : n) * rs.c + ((axes & AxisC) ? 0 : c)) * rs.h +
                                  ((axes & AxisH) ? 0 : yy)) * rs.w + ((axes & AxisW) ? 0 : xx);
          acc[at] += src[yy * s.w + xx];
        }
      }
    }
  }
  const double count = static_cast<double>(s.numel()) / static_cast<double>(rs.numel());
  Tensor<T> y(rs);
  for (std::size_t i = 0; i < acc.size(); ++i) y[i] = static_cast<T>(acc[i] / count);
  return y;
}

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw Error(ErrorCode::ShapeMismatch, "dot " + a.shape().str() + " vs " + b.shape().str());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += double(a[i]) * double(b[i]);
  return static_cast<T>(acc);
}

#define MOIRE_INSTANTIATE_OPS(T)                                                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, ConvGeometry);               \
  template Tensor<T> conv2d_grad_input(const Tensor<T>&, const Tensor<T>&, const Shape&, ConvGeometry);        \
  template Tensor<T> conv2d_grad_weight(const Tensor<T>&, const Tensor<T>&, const Shape&, ConvGeometry);       \
  template Tensor<T> bias_grad(const Tensor<T>&);                                                              \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, ConvGeometry);     \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, int);                                                     \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, int);                                                   \
  template Tensor<T> pool2d(const Tensor<T>&, PoolKind, int, int);                                             \
  template Tensor<T> pool2d_grad(const Tensor<T>&, const Tensor<T>&, PoolKind, int, int);                      \
  template Tensor<T> channel_stats(const Tensor<T>&);                                                          \
  template Tensor<T> channel_stats_grad(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> resize_bilinear(const Tensor<T>&, std::size_t, std::size_t);                              \
  template Tensor<T> resize_bilinear_grad(const Tensor<T>&, const Shape&);                                     \
  template Tensor<T> ewise(const Tensor<T>&, const Tensor<T>&, Binary);                                        \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                                 \
  template Tensor<T> activation_grad(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Activation);        \
  template Tensor<T> scalar_mul(const Tensor<T>&, T);                                                          \
  template Tensor<T> expand(const Tensor<T>&, const Shape&);                                                   \
  template Tensor<T> reduce_to(const Tensor<T>&, const Shape&);                                                \
  template Tensor<T> concat_channels(const std::vector<const Tensor<T>*>&);                                    \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                                           \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&, const std::vector<std::size_t>&);           \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&, std::size_t);                               \
  template Tensor<T> pad_reflect(const Tensor<T>&, Padding);                                                   \
  template Tensor<T> pad_reflect_grad(const Tensor<T>&, Padding, const Shape&);                                \
  template Tensor<T> crop(const Tensor<T>&, std::size_t, std::size_t, std::size_t, std::size_t);               \
  template Tensor<T> crop_grad(const Tensor<T>&, std::size_t, std::size_t, const Shape&);                      \
  template Tensor<T> reduce_sum(const Tensor<T>&, unsigned);                                                   \
  template Tensor<T> reduce_mean(const Tensor<T>&, unsigned);                                                  \
  template T dot(const Tensor<T>&, const Tensor<T>&);

MOIRE_INSTANTIATE_OPS(float)
MOIRE_INSTANTIATE_OPS(double)

}  // namespace moire::ops
