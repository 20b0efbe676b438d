#include "moire/wavelet.hpp"

namespace moire::wavelet {
namespace {

using idx = std::ptrdiff_t;

template <typename T>
void analyze(const Tensor<T>& x, Tensor<T>& out) {
  const std::size_t c = x.c();
  const std::size_t oh = x.h() / 2;
  const std::size_t ow = x.w() / 2;
  const std::size_t planes = x.n() * c;
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const std::size_t n = static_cast<std::size_t>(p) / c;
    const std::size_t ch = static_cast<std::size_t>(p) % c;
    const T* src = x.plane(n, ch);
    T* ll = out.plane(n, ch);
    T* lh = out.plane(n, c + ch);
    T* hl = out.plane(n, 2 * c + ch);
    T* hh = out.plane(n, 3 * c + ch);
    for (std::size_t y = 0; y < oh; ++y) {
      const T* r0 = src + 2 * y * x.w();
      const T* r1 = r0 + x.w();
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const T a = r0[2 * xx], b = r0[2 * xx + 1], cc = r1[2 * xx], d = r1[2 * xx + 1];
        const std::size_t o = y * ow + xx;
        ll[o] = (a + b + cc + d) * T(0.5);
        lh[o] = (a + b - cc - d) * T(0.5);
        hl[o] = (a - b + cc - d) * T(0.5);
        hh[o] = (a - b - cc + d) * T(0.5);
      }
    }
  }
}

template <typename T>
void synthesize(const Tensor<T>& s, Tensor<T>& out) {
  const std::size_t c = out.c();
  const std::size_t ih = s.h();
  const std::size_t iw = s.w();
  const std::size_t planes = out.n() * c;
#pragma omp parallel for schedule(static)
  for (idx p = 0; p < static_cast<idx>(planes); ++p) {
    const std::size_t n = static_cast<std::size_t>(p) / c;
    const std::size_t ch = static_cast<std::size_t>(p) % c;
    const T* ll = s.plane(n, ch);
    const T* lh = s.plane(n, c + ch);
    const T* hl = s.plane(n, 2 * c + ch);
    const T* hh = s.plane(n, 3 * c + ch);
    T* dst = out.plane(n, ch);
    for (std::size_t y = 0; y < ih; ++y) {
      T* r0 = dst + 2 * y * out.w();
      T* r1 = r0 + out.w();
      for (std::size_t xx = 0; xx < iw; ++xx) {
        const std::size_t o = y * iw + xx;
        r0[2 * xx] = (ll[o] + lh[o] + hl[o] + hh[o]) * T(0.5);
        r0[2 * xx + 1] = (ll[o] + lh[o] - hl[o] - hh[o]) * T(0.5);
        r1[2 * xx] = (ll[o] - lh[o] + hl[o] - hh[o]) * T(0.5);
        r1[2 * xx + 1] = (ll[o] - lh[o] - hl[o] + hh[o]) * T(0.5);
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> dwt2_stacked(const Tensor<T>& x) {
  if (x.h() % 2 != 0 || x.w() % 2 != 0) {
    throw Error(ErrorCode::OddSpatialDim, "dwt2 needs even height and width, got " + x.shape().str());
  }
  Tensor<T> out(Shape{x.n(), 4 * x.c(), x.h() / 2, x.w() / 2});
  analyze(x, out);
  return out;
}

template <typename T>
Tensor<T> iwt2_stacked(const Tensor<T>& stacked) {
  if (stacked.c() % 4 != 0) {
    throw Error(ErrorCode::ShapeMismatch, "stacked subbands need a multiple of 4 channels, got " + stacked.shape().str());
  }
  Tensor<T> out(Shape{stacked.n(), stacked.c() / 4, stacked.h() * 2, stacked.w() * 2});
  synthesize(stacked, out);
  return out;
}

template <typename T>
Subbands<T> dwt2(const Tensor<T>& x) {
  auto parts = ops::split_channels(dwt2_stacked(x), std::vector<std::size_t>(4, x.c()));
  return Subbands<T>{std::move(parts[0]), std::move(parts[1]), std::move(parts[2]), std::move(parts[3])};
}

template <typename T>
Tensor<T> iwt2(const Subbands<T>& s) {
  const Shape& ref = s.ll.shape();
  if (s.lh.shape() != ref || s.hl.shape() != ref || s.hh.shape() != ref) {
    throw Error(ErrorCode::ShapeMismatch, "subband shapes differ");
  }
  return iwt2_stacked(ops::concat_channels(std::vector<const Tensor<T>*>{&s.ll, &s.lh, &s.hl, &s.hh}));
}

template <typename T>
ag::Var<T> dwt2(ag::Var<T> x) {
  return x.tape().record("dwt2", dwt2_stacked(x.value()), {x}, [](const Tensor<T>& gy, const std::vector<bool>&) {
    std::vector<Tensor<T>> g;
    g.push_back(iwt2_stacked(gy));
    return g;
  });
}

template <typename T>
ag::Var<T> iwt2(ag::Var<T> stacked) {
  return stacked.tape().record("iwt2", iwt2_stacked(stacked.value()), {stacked},
                               [](const Tensor<T>& gy, const std::vector<bool>&) {
                                 std::vector<Tensor<T>> g;
                                 g.push_back(dwt2_stacked(gy));
                                 return g;
                               });
}

#define MOIRE_INSTANTIATE_WAVELET(T)                    \
  template Subbands<T> dwt2(const Tensor<T>&);          \
  template Tensor<T> iwt2(const Subbands<T>&);          \
  template Tensor<T> dwt2_stacked(const Tensor<T>&);    \
  template Tensor<T> iwt2_stacked(const Tensor<T>&);    \
  template ag::Var<T> dwt2(ag::Var<T>);                 \
  template ag::Var<T> iwt2(ag::Var<T>);

MOIRE_INSTANTIATE_WAVELET(float)
MOIRE_INSTANTIATE_WAVELET(double)

}  // namespace moire::wavelet
