#pragma once

// Composite blocks. Each block is a plain parameter struct plus a forward
// function recorded on a tape; the eager overloads evaluate the same graph on
// a gradient-free tape, so recorded and eager results agree bitwise.
//
// visit(block, prefix, fn) calls fn(name, tensor) for every parameter in a
// fixed order; the network uses it for naming, counting and checkpointing.

#include <array>
#include <string>
#include <variant>

#include "moire/dirconv.hpp"
#include "moire/rng.hpp"

namespace moire::blocks {

template <typename T>
struct Conv {
  Tensor<T> weight;  // (c_out, c_in/groups, k, k)
  Tensor<T> bias;    // (1, c_out, 1, 1)
  ops::ConvGeometry geom;
};

// Kaiming-uniform weights with bound 1/sqrt(fan_in), zero bias. Padding is
// k/2 unless given.
template <typename T>
Conv<T> make_conv(std::size_t c_in, std::size_t c_out, std::size_t k, Rng& rng, int stride = 1, int groups = 1,
                  int padding = -1);
template <typename T>
dirconv::DacParams<T> make_dac(std::size_t c_in, std::size_t c_out, Rng& rng);

template <typename T>
ag::Var<T> apply(const Conv<T>& conv, ag::Var<T> x);

template <typename T>
struct ResBlock {
  Conv<T> c1, c2;
};

// Depthwise spatial conv plus the grouped conv applied to stacked subbands.
template <typename T>
struct FseCore {
  Conv<T> depthwise;  // c -> c, groups = c
  Conv<T> subband;    // 4c -> 4c, groups = 4
};

template <typename T>
struct Fse {
  FseCore<T> core;
  ResBlock<T> r1, r2;
};

template <typename T>
struct Dru {
  ResBlock<T> high, low;  // each over c/2 channels
  Conv<T> fuse;           // 1x1, c -> c
};

template <typename T>
using ResPair = std::array<ResBlock<T>, 2>;

// Front is a plain 3x3 conv or a DAC layer; refinement is two residual
// blocks or a DRU.
template <typename T>
struct Dfse {
  std::variant<Conv<T>, dirconv::DacParams<T>> front;
  FseCore<T> core;
  std::variant<ResPair<T>, Dru<T>> refine;
};

template <typename T>
struct Fsas {
  Conv<T> spatial;  // 2 -> 1, 7x7
  Conv<T> pix1;     // 3c -> c, 3x3 grouped
  Conv<T> pix2;     // c -> c, 1x1
  Tensor<T> a;      // (1,1,1,1), starts at 0
  Tensor<T> b;      // (1,1,1,1), starts at 1
};

template <typename T>
struct Fam {
  Conv<T> spatial;  // 2 -> 1, 7x7
  Conv<T> ch1;      // c -> max(1, c/8), 1x1
  Conv<T> ch2;      // max(1, c/8) -> c, 1x1
  Conv<T> pix1;     // 3c -> c, 3x3 grouped
  Conv<T> pix2;     // c -> c, 1x1
  Conv<T> proj;     // c -> c, 1x1
};

template <typename T>
ResBlock<T> make_resblock(std::size_t c, Rng& rng);
template <typename T>
FseCore<T> make_fse_core(std::size_t c, Rng& rng);
template <typename T>
Fse<T> make_fse(std::size_t c, Rng& rng);
template <typename T>
Dru<T> make_dru(std::size_t c, Rng& rng);
template <typename T>
Dfse<T> make_dfse(std::size_t c_in, std::size_t c, bool dac, bool dru, Rng& rng);
template <typename T>
Fsas<T> make_fsas(std::size_t c, std::size_t groups, Rng& rng);
template <typename T>
Fam<T> make_fam(std::size_t c, std::size_t groups, Rng& rng);

template <typename T>
ag::Var<T> resblock_forward(ag::Var<T> x, const ResBlock<T>& p);
template <typename T>
ag::Var<T> fse_core_forward(ag::Var<T> x, const FseCore<T>& p);
// Odd heights or widths are reflect-padded by one row/column and cropped back.
template <typename T>
ag::Var<T> fse_forward(ag::Var<T> x, const Fse<T>& p);
template <typename T>
ag::Var<T> dru_forward(ag::Var<T> x, const Dru<T>& p);
template <typename T>
ag::Var<T> dfse_forward(ag::Var<T> x, const Dfse<T>& p);
template <typename T>
ag::Var<T> fsas_forward(ag::Var<T> x, const Fsas<T>& p);
template <typename T>
ag::Var<T> fam_forward(ag::Var<T> f_low, ag::Var<T> f_high, const Fam<T>& p);

template <typename T>
Tensor<T> resblock_forward(const Tensor<T>& x, const ResBlock<T>& p);
template <typename T>
Tensor<T> fse_forward(const Tensor<T>& x, const Fse<T>& p);
template <typename T>
Tensor<T> dru_forward(const Tensor<T>& x, const Dru<T>& p);
template <typename T>
Tensor<T> dfse_forward(const Tensor<T>& x, const Dfse<T>& p);
template <typename T>
Tensor<T> fsas_forward(const Tensor<T>& x, const Fsas<T>& p);
template <typename T>
Tensor<T> fam_forward(const Tensor<T>& f_low, const Tensor<T>& f_high, const Fam<T>& p);

// ---- parameter traversal ---------------------------------------------------

template <typename T, typename F>
void visit(Conv<T>& c, const std::string& prefix, F&& fn) {
  fn(prefix + ".weight", c.weight);
  if (!c.bias.empty()) fn(prefix + ".bias", c.bias);
}

template <typename T, typename F>
void visit(dirconv::DacParams<T>& d, const std::string& prefix, F&& fn) {
  for (std::size_t k = 0; k < dirconv::kBranchCount; ++k) {
    const std::string name = prefix + "." + dirconv::branch_name(static_cast<dirconv::Branch>(k));
    fn(name + ".weight", d.weights[k]);
    fn(name + ".bias", d.biases[k]);
  }
  fn(prefix + ".alpha", d.alpha);
}

template <typename T, typename F>
void visit(ResBlock<T>& r, const std::string& prefix, F&& fn) {
  visit(r.c1, prefix + ".conv1", fn);
  visit(r.c2, prefix + ".conv2", fn);
}

template <typename T, typename F>
void visit(FseCore<T>& c, const std::string& prefix, F&& fn) {
  visit(c.depthwise, prefix + ".depthwise", fn);
  visit(c.subband, prefix + ".subband", fn);
}

template <typename T, typename F>
void visit(Fse<T>& f, const std::string& prefix, F&& fn) {
  visit(f.core, prefix, fn);
  visit(f.r1, prefix + ".res1", fn);
  visit(f.r2, prefix + ".res2", fn);
}

template <typename T, typename F>
void visit(Dru<T>& d, const std::string& prefix, F&& fn) {
  visit(d.high, prefix + ".high", fn);
  visit(d.low, prefix + ".low", fn);
  visit(d.fuse, prefix + ".fuse", fn);
}

template <typename T, typename F>
void visit(Dfse<T>& d, const std::string& prefix, F&& fn) {
  if (auto* c = std::get_if<Conv<T>>(&d.front)) {
    visit(*c, prefix + ".front", fn);
  } else {
    visit(std::get<dirconv::DacParams<T>>(d.front), prefix + ".dac", fn);
  }
  visit(d.core, prefix, fn);
  if (auto* r = std::get_if<ResPair<T>>(&d.refine)) {
    visit((*r)[0], prefix + ".res1", fn);
    visit((*r)[1], prefix + ".res2", fn);
  } else {
    visit(std::get<Dru<T>>(d.refine), prefix + ".dru", fn);
  }
}

template <typename T, typename F>
void visit(Fsas<T>& s, const std::string& prefix, F&& fn) {
  visit(s.spatial, prefix + ".spatial", fn);
  visit(s.pix1, prefix + ".pix1", fn);
  visit(s.pix2, prefix + ".pix2", fn);
  fn(prefix + ".a", s.a);
  fn(prefix + ".b", s.b);
}

template <typename T, typename F>
void visit(Fam<T>& m, const std::string& prefix, F&& fn) {
  visit(m.spatial, prefix + ".spatial", fn);
  visit(m.ch1, prefix + ".ch1", fn);
  visit(m.ch2, prefix + ".ch2", fn);
  visit(m.pix1, prefix + ".pix1", fn);
  visit(m.pix2, prefix + ".pix2", fn);
  visit(m.proj, prefix + ".proj", fn);
}

}  // namespace moire::blocks
