#include "moire/dirconv.hpp"

namespace moire::dirconv {
namespace {

template <typename T>
void require_3x3(const Tensor<T>& w) {
  if (w.h() != 3 || w.w() != 3) throw Error(ErrorCode::NotThreeByThree, "kernel " + w.shape().str());
}

template <typename T>
Tensor<T> masked(const Tensor<T>& w, const std::array<double, 9>& mask) {
  require_3x3(w);
  Tensor<T> out(w.shape());
  for (std::size_t s = 0; s < w.n() * w.c(); ++s) {
    const T* src = w.ptr() + s * 9;
    T* dst = out.ptr() + s * 9;
    for (std::size_t i = 0; i < 9; ++i) dst[i] = src[i] * static_cast<T>(mask[i]);
  }
  return out;
}

// Adjoints of the difference transforms.
template <typename T>
Tensor<T> cdc_adjoint(const Tensor<T>& g) {
  Tensor<T> out(g.shape());
  for (std::size_t s = 0; s < g.n() * g.c(); ++s) {
    const T* src = g.ptr() + s * 9;
    T* dst = out.ptr() + s * 9;
    for (std::size_t i = 0; i < 9; ++i) dst[i] = src[i] - src[4];
  }
  return out;
}

template <typename T>
Tensor<T> adc_adjoint(const Tensor<T>& g) {
  Tensor<T> out(g.shape());
  for (std::size_t s = 0; s < g.n() * g.c(); ++s) {
    const T* src = g.ptr() + s * 9;
    T* dst = out.ptr() + s * 9;
    for (std::size_t i = 0; i < 8; ++i) dst[kRing[i]] = src[kRing[i]] - src[kRing[(i + 1) % 8]];
    dst[4] = T(0);
  }
  return out;
}

}  // namespace

const char* branch_name(Branch b) noexcept {
  switch (b) {
    case Branch::Conv: return "conv";
    case Branch::Cdc: return "cdc";
    case Branch::Adc: return "adc";
    case Branch::Hmdc: return "hmdc";
    case Branch::Vmdc: return "vmdc";
  }
  return "?";
}

const std::array<double, 9>& vertical_mask() noexcept {
  static const std::array<double, 9> m{3 / 16.0, 10 / 16.0, 3 / 16.0, 0, 0, 0, -3 / 16.0, -10 / 16.0, -3 / 16.0};
  return m;
}

const std::array<double, 9>& horizontal_mask() noexcept {
  static const std::array<double, 9> m = [] {
    std::array<double, 9> t{};
    const auto& v = vertical_mask();
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) t[r * 3 + c] = v[c * 3 + r];
    return t;
  }();
  return m;
}

template <typename T>
Tensor<T> cdc_kernel(const Tensor<T>& w) {
  require_3x3(w);
  Tensor<T> out = w;
  for (std::size_t s = 0; s < w.n() * w.c(); ++s) {
    const T* src = w.ptr() + s * 9;
    T ring = T(0);
    for (std::size_t i : kRing) ring += src[i];
    out.ptr()[s * 9 + 4] = -ring;
  }
  return out;
}

template <typename T>
Tensor<T> adc_kernel(const Tensor<T>& w) {
  require_3x3(w);
  Tensor<T> out(w.shape());
  for (std::size_t s = 0; s < w.n() * w.c(); ++s) {
    const T* src = w.ptr() + s * 9;
    T* dst = out.ptr() + s * 9;
    for (std::size_t i = 0; i < 8; ++i) dst[kRing[i]] = src[kRing[i]] - src[kRing[(i + 7) % 8]];
    dst[4] = T(0);
  }
  return out;
}

template <typename T>
Tensor<T> hmdc_kernel(const Tensor<T>& w) {
  return masked(w, horizontal_mask());
}

template <typename T>
Tensor<T> vmdc_kernel(const Tensor<T>& w) {
  return masked(w, vertical_mask());
}

template <typename T>
Tensor<T> branch_kernel(const Tensor<T>& w, Branch b) {
  switch (b) {
    case Branch::Conv: return w;
    case Branch::Cdc: return cdc_kernel(w);
    case Branch::Adc: return adc_kernel(w);
    case Branch::Hmdc: return hmdc_kernel(w);
    case Branch::Vmdc: return vmdc_kernel(w);
  }
  return w;
}

template <typename T>
ag::Var<T> branch_kernel(ag::Var<T> w, Branch b) {
  if (b == Branch::Conv) return w;
  return w.tape().record(branch_name(b), branch_kernel(w.value(), b), {w},
                         [b](const Tensor<T>& gy, const std::vector<bool>&) {
                           std::vector<Tensor<T>> g(1);
                           switch (b) {
                             case Branch::Cdc: g[0] = cdc_adjoint(gy); break;
                             case Branch::Adc: g[0] = adc_adjoint(gy); break;
                             case Branch::Hmdc: g[0] = masked(gy, horizontal_mask()); break;
                             case Branch::Vmdc: g[0] = masked(gy, vertical_mask()); break;
                             case Branch::Conv: g[0] = gy; break;
                           }
                           return g;
                         });
}

template <typename T>
std::pair<ag::Var<T>, ag::Var<T>> dac_fuse(ag::Tape<T>& tape, const DacParams<T>& p) {
  const Shape& ref = p.weights[0].shape();
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    if (p.weights[k].shape() != ref) throw Error(ErrorCode::ShapeMismatch, "DAC branch kernels differ in shape");
    if (p.biases[k].numel() != ref.n) throw Error(ErrorCode::ShapeMismatch, "DAC bias length");
  }
  if (p.alpha.numel() != kBranchCount) throw Error(ErrorCode::ShapeMismatch, "DAC needs five fusion coefficients");
  const auto alphas = ag::split_channels(tape.param(p.alpha), std::vector<std::size_t>(kBranchCount, 1));
  ag::Var<T> kernel, bias;
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    const auto branch = static_cast<Branch>(k);
    ag::Var<T> wk = ag::mul_scalar(branch_kernel(tape.param(p.weights[k]), branch), alphas[k]);
    ag::Var<T> bk = ag::mul_scalar(tape.param(p.biases[k]), alphas[k]);
    kernel = k == 0 ? wk : ag::add(kernel, wk);
    bias = k == 0 ? bk : ag::add(bias, bk);
  }
  return {kernel, bias};
}

template <typename T>
ag::Var<T> dac_forward(ag::Var<T> x, const DacParams<T>& p) {
  auto [kernel, bias] = dac_fuse(x.tape(), p);
  return ag::conv2d(x, kernel, bias, ops::ConvGeometry{1, 1, 1});
}

template <typename T>
ops::ConvSpec<T> dac_fuse(const DacParams<T>& p) {
  ag::Tape<T> tape(false);
  auto [kernel, bias] = dac_fuse(tape, p);
  return ops::ConvSpec<T>{kernel.value(), bias.value(), ops::ConvGeometry{1, 1, 1}};
}

template <typename T>
Tensor<T> dac_forward(const Tensor<T>& x, const DacParams<T>& p) {
  ag::Tape<T> tape(false);
  return dac_forward(tape.constant(x), p).value();
}

template <typename T>
std::size_t count_params(const DacParams<T>& p) {
  std::size_t total = p.alpha.numel();
  for (std::size_t k = 0; k < kBranchCount; ++k) total += p.weights[k].numel() + p.biases[k].numel();
  return total;
}

#define MOIRE_INSTANTIATE_DIRCONV(T)                                                  \
  template Tensor<T> cdc_kernel(const Tensor<T>&);                                    \
  template Tensor<T> adc_kernel(const Tensor<T>&);                                    \
  template Tensor<T> hmdc_kernel(const Tensor<T>&);                                   \
  template Tensor<T> vmdc_kernel(const Tensor<T>&);                                   \
  template Tensor<T> branch_kernel(const Tensor<T>&, Branch);                         \
  template ops::ConvSpec<T> dac_fuse(const DacParams<T>&);                            \
  template Tensor<T> dac_forward(const Tensor<T>&, const DacParams<T>&);              \
  template std::size_t count_params(const DacParams<T>&);                             \
  template ag::Var<T> branch_kernel(ag::Var<T>, Branch);                              \
  template std::pair<ag::Var<T>, ag::Var<T>> dac_fuse(ag::Tape<T>&, const DacParams<T>&); \
  template ag::Var<T> dac_forward(ag::Var<T>, const DacParams<T>&);

MOIRE_INSTANTIATE_DIRCONV(float)
MOIRE_INSTANTIATE_DIRCONV(double)

}  // namespace moire::dirconv
