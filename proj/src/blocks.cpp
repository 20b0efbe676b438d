#include "moire/blocks.hpp"

#include <cmath>

#include "moire/wavelet.hpp"

namespace moire::blocks {
namespace {

template <typename T>
void require_channels(ag::Var<T> x, std::size_t c, const char* block) {
  if (x.shape().c != c) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(block) + " expects " + std::to_string(c) + " channels, got " + x.shape().str());
  }
}

template <typename T>
std::size_t out_channels(const Conv<T>& c) {
  return c.weight.n();
}

template <typename T>
std::size_t in_channels(const Conv<T>& c) {
  return c.weight.c() * static_cast<std::size_t>(c.geom.groups);
}

// Runs `body` on x reflect-padded to even height and width, then crops back.
template <typename T, typename F>
ag::Var<T> on_even_grid(ag::Var<T> x, F&& body) {
  const Shape s = x.shape();
  const ops::Padding pad{0, s.h % 2, 0, s.w % 2};
  if (pad.bottom == 0 && pad.right == 0) return body(x);
  return ag::crop(body(ag::pad_reflect(x, pad)), 0, 0, s.h, s.w);
}

template <typename T>
ag::Var<T> pixel_attention(ag::Var<T> base, ag::Var<T> map_a, ag::Var<T> map_b, const Conv<T>& pix1,
                           const Conv<T>& pix2) {
  const Shape s = base.shape();
  auto stacked = ag::concat_channels(std::vector<ag::Var<T>>{base, ag::expand(map_a, s), ag::expand(map_b, s)});
  return ag::sigmoid(apply(pix2, ag::relu(apply(pix1, stacked))));
}

template <typename T>
ag::Var<T> refine_forward(ag::Var<T> x, const std::variant<ResPair<T>, Dru<T>>& refine) {
  if (const auto* r = std::get_if<ResPair<T>>(&refine)) {
    return resblock_forward(resblock_forward(x, (*r)[0]), (*r)[1]);
  }
  return dru_forward(x, std::get<Dru<T>>(refine));
}

}  // namespace

template <typename T>
Conv<T> make_conv(std::size_t c_in, std::size_t c_out, std::size_t k, Rng& rng, int stride, int groups,
                  int padding) {
  const auto g = static_cast<std::size_t>(groups);
  if (g == 0 || c_in % g != 0 || c_out % g != 0) {
    throw Error(ErrorCode::BadConfig, "channels " + std::to_string(c_in) + "->" + std::to_string(c_out) +
                                          " not divisible by groups " + std::to_string(groups));
  }
  const std::size_t fan_in = c_in / g * k * k;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Conv<T> c;
  c.weight = rng.uniform_tensor<T>(Shape{c_out, c_in / g, k, k}, -bound, bound);
  c.bias = Tensor<T>(Shape{1, c_out, 1, 1});
  c.geom = ops::ConvGeometry{stride, padding < 0 ? static_cast<int>(k / 2) : padding, groups};
  return c;
}

template <typename T>
dirconv::DacParams<T> make_dac(std::size_t c_in, std::size_t c_out, Rng& rng) {
  dirconv::DacParams<T> p;
  for (std::size_t k = 0; k < dirconv::kBranchCount; ++k) {
    Conv<T> c = make_conv<T>(c_in, c_out, 3, rng);
    p.weights[k] = std::move(c.weight);
    p.biases[k] = std::move(c.bias);
  }
  p.alpha = Tensor<T>(Shape{1, 5, 1, 1}, std::vector<T>{T(1), T(0.1), T(0.1), T(0.1), T(0.1)});
  return p;
}

template <typename T>
ag::Var<T> apply(const Conv<T>& conv, ag::Var<T> x) {
  ag::Tape<T>& t = x.tape();
  const ag::Var<T> bias = conv.bias.empty() ? ag::Var<T>() : t.param(conv.bias);
  return ag::conv2d(x, t.param(conv.weight), bias, conv.geom);
}

template <typename T>
ResBlock<T> make_resblock(std::size_t c, Rng& rng) {
  ResBlock<T> r;
  r.c1 = make_conv<T>(c, c, 3, rng);
  r.c2 = make_conv<T>(c, c, 3, rng);
  return r;
}

template <typename T>
FseCore<T> make_fse_core(std::size_t c, Rng& rng) {
  FseCore<T> core;
  core.depthwise = make_conv<T>(c, c, 3, rng, 1, static_cast<int>(c));
  core.subband = make_conv<T>(4 * c, 4 * c, 3, rng, 1, 4);
  return core;
}

template <typename T>
Fse<T> make_fse(std::size_t c, Rng& rng) {
  Fse<T> f;
  f.core = make_fse_core<T>(c, rng);
  f.r1 = make_resblock<T>(c, rng);
  f.r2 = make_resblock<T>(c, rng);
  return f;
}

template <typename T>
Dru<T> make_dru(std::size_t c, Rng& rng) {
  if (c % 2 != 0) throw Error(ErrorCode::OddChannels, "DRU needs an even channel count, got " + std::to_string(c));
  Dru<T> d;
  d.high = make_resblock<T>(c / 2, rng);
  d.low = make_resblock<T>(c / 2, rng);
  d.fuse = make_conv<T>(c, c, 1, rng);
  return d;
}

template <typename T>
Dfse<T> make_dfse(std::size_t c_in, std::size_t c, bool dac, bool dru, Rng& rng) {
  Dfse<T> d;
  if (dac) {
    d.front = make_dac<T>(c_in, c, rng);
  } else {
    d.front = make_conv<T>(c_in, c, 3, rng);
  }
  d.core = make_fse_core<T>(c, rng);
  if (dru) {
    d.refine = make_dru<T>(c, rng);
  } else {
    d.refine = ResPair<T>{make_resblock<T>(c, rng), make_resblock<T>(c, rng)};
  }
  return d;
}

template <typename T>
Fsas<T> make_fsas(std::size_t c, std::size_t groups, Rng& rng) {
  Fsas<T> s;
  s.spatial = make_conv<T>(2, 1, 7, rng);
  s.pix1 = make_conv<T>(3 * c, c, 3, rng, 1, static_cast<int>(groups));
  s.pix2 = make_conv<T>(c, c, 1, rng);
  s.a = Tensor<T>::scalar(T(0));
  s.b = Tensor<T>::scalar(T(1));
  return s;
}

template <typename T>
Fam<T> make_fam(std::size_t c, std::size_t groups, Rng& rng) {
  const std::size_t hidden = std::max<std::size_t>(1, c / 8);
  Fam<T> m;
  m.spatial = make_conv<T>(2, 1, 7, rng);
  m.ch1 = make_conv<T>(c, hidden, 1, rng);
  m.ch2 = make_conv<T>(hidden, c, 1, rng);
  m.pix1 = make_conv<T>(3 * c, c, 3, rng, 1, static_cast<int>(groups));
  m.pix2 = make_conv<T>(c, c, 1, rng);
  m.proj = make_conv<T>(c, c, 1, rng);
  return m;
}

template <typename T>
ag::Var<T> resblock_forward(ag::Var<T> x, const ResBlock<T>& p) {
  require_channels(x, in_channels(p.c1), "resblock");
  return ag::add(x, apply(p.c2, ag::relu(apply(p.c1, x))));
}

template <typename T>
ag::Var<T> fse_core_forward(ag::Var<T> x, const FseCore<T>& p) {
  require_channels(x, in_channels(p.depthwise), "fse");
  auto spatial = apply(p.depthwise, x);
  auto frequency = wavelet::iwt2(apply(p.subband, wavelet::dwt2(x)));
  return ag::add(spatial, frequency);
}

template <typename T>
ag::Var<T> fse_forward(ag::Var<T> x, const Fse<T>& p) {
  return on_even_grid(x, [&](ag::Var<T> v) {
    return resblock_forward(resblock_forward(fse_core_forward(v, p.core), p.r1), p.r2);
  });
}

template <typename T>
ag::Var<T> dru_forward(ag::Var<T> x, const Dru<T>& p) {
  const Shape s = x.shape();
  if (s.c % 2 != 0) throw Error(ErrorCode::OddChannels, "DRU input " + s.str());
  require_channels(x, in_channels(p.fuse), "dru");
  auto halves = ag::split_channels(x, std::vector<std::size_t>{s.c / 2, s.c / 2});
  auto high = resblock_forward(halves[0], p.high);
  auto low = ag::resize_bilinear(halves[1], (s.h + 1) / 2, (s.w + 1) / 2);
  low = ag::resize_bilinear(resblock_forward(low, p.low), s.h, s.w);
  return ag::add(x, apply(p.fuse, ag::concat_channels(std::vector<ag::Var<T>>{high, low})));
}

template <typename T>
ag::Var<T> dfse_forward(ag::Var<T> x, const Dfse<T>& p) {
  return on_even_grid(x, [&](ag::Var<T> v) {
    ag::Var<T> g;
    if (const auto* c = std::get_if<Conv<T>>(&p.front)) {
      g = apply(*c, v);
    } else {
      g = dirconv::dac_forward(v, std::get<dirconv::DacParams<T>>(p.front));
    }
    return refine_forward(fse_core_forward(g, p.core), p.refine);
  });
}

template <typename T>
ag::Var<T> fsas_forward(ag::Var<T> x, const Fsas<T>& p) {
  require_channels(x, out_channels(p.pix2), "fsas");
  ag::Tape<T>& t = x.tape();
  auto fs = apply(p.spatial, ag::channel_stats(x));
  auto centered = ag::sub(fs, ag::expand(ag::reduce_mean(fs, ops::AxesSpatial), fs.shape()));
  auto ffs = ag::add(ag::mul(x, centered), x);
  auto stats = ag::split_channels(ag::channel_stats(ffs), std::vector<std::size_t>{1, 1});
  auto wp = pixel_attention(ffs, stats[0], stats[1], p.pix1, p.pix2);
  return ag::add(ag::mul_scalar(ag::mul(wp, ffs), t.param(p.a)), ag::mul_scalar(x, t.param(p.b)));
}

template <typename T>
ag::Var<T> fam_forward(ag::Var<T> f_low, ag::Var<T> f_high, const Fam<T>& p) {
  if (f_low.shape() != f_high.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "fam inputs " + f_low.shape().str() + " vs " + f_high.shape().str());
  }
  require_channels(f_low, out_channels(p.proj), "fam");
  auto sum = ag::add(f_low, f_high);
  auto ws = ag::sigmoid(apply(p.spatial, ag::channel_stats(sum)));
  auto wc = ag::sigmoid(apply(p.ch2, ag::relu(apply(p.ch1, ag::reduce_mean(sum, ops::AxesSpatial)))));
  auto wp = pixel_attention(sum, ws, wc, p.pix1, p.pix2);
  // W_p*f_high + (1-W_p)*f_low, written so equal inputs cancel exactly.
  auto blended = ag::add(f_low, ag::mul(wp, ag::sub(f_high, f_low)));
  return ag::add(sum, apply(p.proj, blended));
}

template <typename T>
Tensor<T> resblock_forward(const Tensor<T>& x, const ResBlock<T>& p) {
  ag::Tape<T> t(false);
  return resblock_forward(t.constant(x), p).value();
}

template <typename T>
Tensor<T> fse_forward(const Tensor<T>& x, const Fse<T>& p) {
  ag::Tape<T> t(false);
  return fse_forward(t.constant(x), p).value();
}

template <typename T>
Tensor<T> dru_forward(const Tensor<T>& x, const Dru<T>& p) {
  ag::Tape<T> t(false);
  return dru_forward(t.constant(x), p).value();
}

template <typename T>
Tensor<T> dfse_forward(const Tensor<T>& x, const Dfse<T>& p) {
  ag::Tape<T> t(false);
  return dfse_forward(t.constant(x), p).value();
}

template <typename T>
Tensor<T> fsas_forward(const Tensor<T>& x, const Fsas<T>& p) {
  ag::Tape<T> t(false);
  return fsas_forward(t.constant(x), p).value();
}

template <typename T>
Tensor<T> fam_forward(const Tensor<T>& f_low, const Tensor<T>& f_high, const Fam<T>& p) {
  ag::Tape<T> t(false);
  return fam_forward(t.constant(f_low), t.constant(f_high), p).value();
}

#define MOIRE_INSTANTIATE_BLOCKS(T)                                                                      \
  template Conv<T> make_conv<T>(std::size_t, std::size_t, std::size_t, Rng&, int, int, int);            \
  template dirconv::DacParams<T> make_dac<T>(std::size_t, std::size_t, Rng&);                           \
  template ag::Var<T> apply(const Conv<T>&, ag::Var<T>);                                                 \
  template ResBlock<T> make_resblock<T>(std::size_t, Rng&);                                             \
  template FseCore<T> make_fse_core<T>(std::size_t, Rng&);                                              \
  template Fse<T> make_fse<T>(std::size_t, Rng&);                                                       \
  template Dru<T> make_dru<T>(std::size_t, Rng&);                                                       \
  template Dfse<T> make_dfse<T>(std::size_t, std::size_t, bool, bool, Rng&);                            \
  template Fsas<T> make_fsas<T>(std::size_t, std::size_t, Rng&);                                        \
  template Fam<T> make_fam<T>(std::size_t, std::size_t, Rng&);                                          \
  template ag::Var<T> resblock_forward(ag::Var<T>, const ResBlock<T>&);                                  \
  template ag::Var<T> fse_core_forward(ag::Var<T>, const FseCore<T>&);                                   \
  template ag::Var<T> fse_forward(ag::Var<T>, const Fse<T>&);                                            \
  template ag::Var<T> dru_forward(ag::Var<T>, const Dru<T>&);                                            \
  template ag::Var<T> dfse_forward(ag::Var<T>, const Dfse<T>&);                                          \
  template ag::Var<T> fsas_forward(ag::Var<T>, const Fsas<T>&);                                          \
  template ag::Var<T> fam_forward(ag::Var<T>, ag::Var<T>, const Fam<T>&);                                \
  template Tensor<T> resblock_forward(const Tensor<T>&, const ResBlock<T>&);                             \
  template Tensor<T> fse_forward(const Tensor<T>&, const Fse<T>&);                                       \
  template Tensor<T> dru_forward(const Tensor<T>&, const Dru<T>&);                                       \
  template Tensor<T> dfse_forward(const Tensor<T>&, const Dfse<T>&);                                     \
  template Tensor<T> fsas_forward(const Tensor<T>&, const Fsas<T>&);                                     \
  template Tensor<T> fam_forward(const Tensor<T>&, const Tensor<T>&, const Fam<T>&);

MOIRE_INSTANTIATE_BLOCKS(float)
MOIRE_INSTANTIATE_BLOCKS(double)

}  // namespace moire::blocks
