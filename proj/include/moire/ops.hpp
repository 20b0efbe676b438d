#pragma once

// Eager tensor kernels. Loops are OpenMP-parallel over batch, group or channel
// planes; every reduction runs in a fixed order, so results are bitwise
// identical for any thread count. Serial loop-nest versions of the heavy
// kernels live in reference.hpp.

#include <cstdint>
#include <vector>

#include "moire/tensor.hpp"

namespace moire::ops {

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
  int groups = 1;
  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

// weight: (c_out, c_in/groups, kh, kw); bias: c_out values or empty.
template <typename T>
struct ConvSpec {
  Tensor<T> weight;
  Tensor<T> bias;
  ConvGeometry geom;
};

// Cross-correlation (no kernel flip) with zero padding.
Shape conv2d_output_shape(const Shape& x, const Shape& weight, ConvGeometry g);
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ConvGeometry g);
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvSpec<T>& spec) {
  return conv2d(x, spec.weight, spec.bias, spec.geom);
}
template <typename T>
Tensor<T> conv2d_grad_input(const Tensor<T>& grad_out, const Tensor<T>& weight, const Shape& x_shape,
                            ConvGeometry g);
template <typename T>
Tensor<T> conv2d_grad_weight(const Tensor<T>& grad_out, const Tensor<T>& x, const Shape& weight_shape,
                             ConvGeometry g);
// Sum over n, h, w; shaped (1, C, 1, 1).
template <typename T>
Tensor<T> bias_grad(const Tensor<T>& grad_out);

// Adjoint of conv2d. weight: (c_in, c_out/groups, kh, kw), the same tensor a
// conv2d from c_out to c_in channels would use. Output side (h-1)*s - 2p + k.
Shape conv_transpose2d_output_shape(const Shape& x, const Shape& weight, ConvGeometry g);
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ConvGeometry g);

// out[n, k, y*r + i, x*r + j] = in[n, k*r*r + i*r + j, y, x]
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r);
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r);

enum class PoolKind { Max, Avg };
template <typename T>
Tensor<T> pool2d(const Tensor<T>& x, PoolKind kind, int k, int s);
template <typename T>
Tensor<T> pool2d_grad(const Tensor<T>& grad_out, const Tensor<T>& x, PoolKind kind, int k, int s);

// (n, 2, h, w): plane 0 is the max over channels, plane 1 the mean.
template <typename T>
Tensor<T> channel_stats(const Tensor<T>& x);
template <typename T>
Tensor<T> channel_stats_grad(const Tensor<T>& grad_out, const Tensor<T>& x);

// align_corners = false: src = (dst + 0.5) * in / out - 0.5, clamped at 0.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);
template <typename T>
Tensor<T> resize_bilinear_grad(const Tensor<T>& grad_out, const Shape& in_shape);

enum class Binary { Add, Sub, Mul };
// b must match a exactly or be a single-channel map (n, 1, h, w).
template <typename T>
Tensor<T> ewise(const Tensor<T>& a, const Tensor<T>& b, Binary op);

enum class Activation { Relu, Sigmoid };
template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation f);
// Gradient given the forward input and output.
template <typename T>
Tensor<T> activation_grad(const Tensor<T>& grad_out, const Tensor<T>& x, const Tensor<T>& y, Activation f);

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& x, T s);

// Broadcast dims of size 1 up to `shape`.
template <typename T>
Tensor<T> expand(const Tensor<T>& x, const Shape& shape);
// Adjoint of expand: sums over every dim where `shape` has extent 1.
template <typename T>
Tensor<T> reduce_to(const Tensor<T>& x, const Shape& shape);

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts);
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, const std::vector<std::size_t>& sizes);
// Two parts: channels [0, point) and [point, c).
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, std::size_t point);

struct Padding {
  std::size_t top = 0, bottom = 0, left = 0, right = 0;
};
// Mirror padding without edge repetition; every amount must be < the dim.
template <typename T>
Tensor<T> pad_reflect(const Tensor<T>& x, Padding p);
template <typename T>
Tensor<T> pad_reflect_grad(const Tensor<T>& grad_out, Padding p, const Shape& in_shape);
template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);
// Embeds `grad_out` at (y0, x0) inside zeros of `in_shape`.
template <typename T>
Tensor<T> crop_grad(const Tensor<T>& grad_out, std::size_t y0, std::size_t x0, const Shape& in_shape);

enum Axes : unsigned { AxisN = 1, AxisC = 2, AxisH = 4, AxisW = 8, AxesSpatial = 12, AxesAll = 15 };
Shape reduced_shape(const Shape& s, unsigned axes);
template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, unsigned axes);
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, unsigned axes);

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace moire::ops
