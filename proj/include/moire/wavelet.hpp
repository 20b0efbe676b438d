#pragma once

// Single-level orthonormal 2-D Haar transform. For each 2x2 block [a b; c d]:
//   ll = (a+b+c+d)/2   lh = (a+b-c-d)/2   hl = (a-b+c-d)/2   hh = (a-b-c+d)/2
// The 4x4 block matrix is symmetric and orthogonal, so the inverse applies the
// same formulas and each transform is the other's adjoint.

#include "moire/autograd.hpp"

namespace moire::wavelet {

template <typename T>
struct Subbands {
  Tensor<T> ll, lh, hl, hh;
};

template <typename T>
Subbands<T> dwt2(const Tensor<T>& x);
template <typename T>
Tensor<T> iwt2(const Subbands<T>& s);

// Subbands stacked on the channel axis as [ll | lh | hl | hh], each c wide.
template <typename T>
Tensor<T> dwt2_stacked(const Tensor<T>& x);
template <typename T>
Tensor<T> iwt2_stacked(const Tensor<T>& stacked);

template <typename T>
ag::Var<T> dwt2(ag::Var<T> x);
template <typename T>
ag::Var<T> iwt2(ag::Var<T> stacked);

}  // namespace moire::wavelet
