#pragma once

// Detail-augmented convolution: five parallel 3x3 branches (plain, central
// difference, angular difference, horizontal and vertical directional
// difference) whose kernels are linear transforms of per-branch weights. By
// linearity the branches collapse into one kernel and one bias:
//   kernel = sum_k alpha_k * T_k(w_k),  bias = sum_k alpha_k * b_k

#include <array>

#include "moire/autograd.hpp"

namespace moire::dirconv {

enum class Branch { Conv = 0, Cdc = 1, Adc = 2, Hmdc = 3, Vmdc = 4 };
inline constexpr std::size_t kBranchCount = 5;
const char* branch_name(Branch b) noexcept;

// Scharr-weighted masks, row-major 3x3. Rows of the vertical mask: +top, 0, -bottom.
const std::array<double, 9>& vertical_mask() noexcept;
const std::array<double, 9>& horizontal_mask() noexcept;

// Ring positions of a 3x3 kernel, clockwise from the top-left tap.
inline constexpr std::array<std::size_t, 8> kRing{0, 1, 2, 5, 8, 7, 6, 3};

template <typename T>
struct DacParams {
  std::array<Tensor<T>, kBranchCount> weights;  // each (c_out, c_in, 3, 3)
  std::array<Tensor<T>, kBranchCount> biases;   // each (1, c_out, 1, 1)
  Tensor<T> alpha;                              // (1, 5, 1, 1)
};

// w - (sum of taps) at the center, per (out, in) slice; the center is
// computed as minus the ring sum, which is the same value.
template <typename T>
Tensor<T> cdc_kernel(const Tensor<T>& w);
// Ring tap i becomes w[i] - w[i-1] (cyclic), center becomes 0.
template <typename T>
Tensor<T> adc_kernel(const Tensor<T>& w);
template <typename T>
Tensor<T> hmdc_kernel(const Tensor<T>& w);
template <typename T>
Tensor<T> vmdc_kernel(const Tensor<T>& w);
template <typename T>
Tensor<T> branch_kernel(const Tensor<T>& w, Branch b);

template <typename T>
ops::ConvSpec<T> dac_fuse(const DacParams<T>& p);
// Same-padded (stride 1, padding 1) convolution with the fused kernel.
template <typename T>
Tensor<T> dac_forward(const Tensor<T>& x, const DacParams<T>& p);

template <typename T>
std::size_t count_params(const DacParams<T>& p);

// Differentiable forms. Parameters enter the tape through Tape::param.
template <typename T>
ag::Var<T> branch_kernel(ag::Var<T> w, Branch b);
template <typename T>
std::pair<ag::Var<T>, ag::Var<T>> dac_fuse(ag::Tape<T>& tape, const DacParams<T>& p);
template <typename T>
ag::Var<T> dac_forward(ag::Var<T> x, const DacParams<T>& p);

}  // namespace moire::dirconv
