#pragma once

// Serial loop-nest kernels. They mirror the definitions directly and serve as
// test oracles and as the baseline in bench/.

#include "moire/ops.hpp"

namespace moire::reference {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ops::ConvGeometry g);

// Scatter-add form: every input pixel stamps the kernel into the output.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ops::ConvGeometry g);

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r);

template <typename T>
Tensor<T> channel_stats(const Tensor<T>& x);

}  // namespace moire::reference
