#include "moire/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "moire/blocks.hpp"
#include "moire/network.hpp"
#include "moire/wavelet.hpp"

namespace moire::gradcheck {

namespace {

using ag::GradCheckOptions;
using ag::GradCheckReport;
using ag::Tape;
using ag::Var;
using ops::ConvGeometry;

template <typename T>
using V = std::vector<Var<T>>;

template <typename T>
Tensor<T> rnd(Rng& rng, Shape s, double lo = -1, double hi = 1) {
  return rng.uniform_tensor<T>(s, lo, hi);
}

// Bounded away from zero so relu stays differentiable at every coordinate.
template <typename T>
Tensor<T> away_from_zero(Rng& rng, Shape s) {
  Tensor<T> t(s);
  for (auto& v : t.data()) v = static_cast<T>((rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.05, 1.0));
  return t;
}

// Runs each case either as a finite-difference check or, for the
// cross-precision comparison, by collecting d sum(op * R) / d target.
template <typename T>
struct Probe {
  bool finite_diff = true;
  GradCheckOptions opts;
  GradCheckReport report;
  std::vector<Tensor<T>> grads;

  void absorb(const GradCheckReport& r) {
    report.max_rel_error = std::max(report.max_rel_error, r.max_rel_error);
    report.coords += r.coords;
  }

  Var<T> projected(Tape<T>& tape, Var<T> y) const {
    Rng rng(opts.seed);
    return ag::reduce_sum(ag::mul(y, tape.constant(rng.uniform_tensor<T>(y.value().shape(), -1, 1))), ops::AxesAll);
  }

  void inputs(const ag::TapeFn<T>& fn, const std::vector<Tensor<T>>& in) {
    if (finite_diff) return absorb(ag::finite_diff_check<T>(fn, in, opts));
    Tape<T> tape;
    V<T> vars;
    for (const auto& t : in) vars.push_back(tape.leaf(t));
    tape.backward(projected(tape, fn(tape, vars)));
    for (const auto& v : vars) grads.push_back(tape.grad_or_zeros(v));
  }

  void params(const ag::ParamFn<T>& fn, const std::vector<Tensor<T>*>& targets) {
    if (finite_diff) return absorb(ag::finite_diff_check_params<T>(fn, targets, opts));
    Tape<T> tape;
    tape.backward(projected(tape, fn(tape)));
    for (const Tensor<T>* t : targets) {
      const Tensor<T>* g = tape.grad_of(*t);
      grads.push_back(g ? *g : Tensor<T>(t->shape()));
    }
  }
};

template <typename T, typename B>
std::vector<Tensor<T>*> with_params(B& block, std::vector<Tensor<T>*> targets) {
  blocks::visit(block, "b", [&](const std::string&, Tensor<T>& t) { targets.push_back(&t); });
  return targets;
}

template <typename T, typename B>
void randomize(B& block, Rng& rng) {
  blocks::visit(block, "b", [&](const std::string&, Tensor<T>& t) {
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-0.5, 0.5));
  });
}

template <typename T>
void check(const std::string& name, std::uint64_t seed, Probe<T>& probe) {
  Rng rng(seed);
  const Shape s{1, 4, 8, 8};

  if (name == "conv2d") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::conv2d(v[0], v[1], v[2], ConvGeometry{1, 1, 1}); },
                     {rnd<T>(rng, s), rnd<T>(rng, Shape{4, 4, 3, 3}), rnd<T>(rng, Shape{1, 4, 1, 1})});
  }
  if (name == "conv2d_strided_grouped") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::conv2d(v[0], v[1], v[2], ConvGeometry{2, 1, 2}); },
                     {rnd<T>(rng, s), rnd<T>(rng, Shape{4, 2, 3, 3}), rnd<T>(rng, Shape{1, 4, 1, 1})});
  }
  if (name == "conv_transpose2d") {
    return probe.inputs(
        [](Tape<T>&, const V<T>& v) { return ag::conv_transpose2d(v[0], v[1], v[2], ConvGeometry{2, 1, 1}); },
        {rnd<T>(rng, Shape{1, 4, 4, 4}), rnd<T>(rng, Shape{4, 2, 4, 4}), rnd<T>(rng, Shape{1, 2, 1, 1})});
  }
  if (name == "pixel_shuffle") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::pixel_shuffle(v[0], 2); },
                     {rnd<T>(rng, Shape{1, 8, 3, 4})});
  }
  if (name == "pixel_unshuffle") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::pixel_unshuffle(v[0], 2); },
                     {rnd<T>(rng, Shape{1, 2, 6, 8})});
  }
  if (name == "max_pool") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::pool2d(v[0], ops::PoolKind::Max, 2, 2); },
                     {rnd<T>(rng, Shape{1, 3, 8, 8})});
  }
  if (name == "avg_pool") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::pool2d(v[0], ops::PoolKind::Avg, 3, 2); },
                     {rnd<T>(rng, Shape{1, 3, 8, 7})});
  }
  if (name == "channel_stats") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::channel_stats(v[0]); }, {rnd<T>(rng, s)});
  }
  if (name == "resize_bilinear") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::resize_bilinear(v[0], 13, 9); },
                     {rnd<T>(rng, Shape{1, 2, 7, 6})});
  }
  if (name == "add") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::add(v[0], v[1]); }, {rnd<T>(rng, s), rnd<T>(rng, s)});
  }
  if (name == "sub") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::sub(v[0], v[1]); },
                     {rnd<T>(rng, s), rnd<T>(rng, Shape{1, 1, 8, 8})});
  }
  if (name == "mul") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::mul(v[0], v[1]); },
                     {rnd<T>(rng, s), rnd<T>(rng, Shape{1, 1, 8, 8})});
  }
  if (name == "relu") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::relu(v[0]); }, {away_from_zero<T>(rng, s)});
  }
  if (name == "sigmoid") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::sigmoid(v[0]); }, {rnd<T>(rng, s, -3, 3)});
  }
  if (name == "scale") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::scale(v[0], T(-1.7)); }, {rnd<T>(rng, s)});
  }
  if (name == "mul_scalar") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::mul_scalar(v[0], v[1]); },
                     {rnd<T>(rng, s), Tensor<T>::scalar(T(0.8))});
  }
  if (name == "expand") {
    return probe.inputs([s](Tape<T>&, const V<T>& v) { return ag::expand(v[0], s); }, {rnd<T>(rng, Shape{1, 1, 8, 8})});
  }
  if (name == "concat_channels") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::concat_channels(V<T>{v[0], v[1], v[0]}); },
                     {rnd<T>(rng, Shape{1, 3, 6, 7}), rnd<T>(rng, Shape{1, 2, 6, 7})});
  }
  if (name == "split_channels") {
    return probe.inputs(
        [](Tape<T>&, const V<T>& v) {
          auto parts = ag::split_channels(v[0], std::vector<std::size_t>{1, 2});
          return ag::mul(parts[0], ag::reduce_sum(parts[1], ops::AxisC));
        },
        {rnd<T>(rng, Shape{1, 3, 6, 7})});
  }
  if (name == "pad_reflect") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::pad_reflect(v[0], ops::Padding{1, 2, 3, 0}); },
                     {rnd<T>(rng, Shape{1, 3, 6, 7})});
  }
  if (name == "crop") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::crop(v[0], 1, 2, 4, 3); },
                     {rnd<T>(rng, Shape{1, 3, 6, 7})});
  }
  if (name == "reduce_sum") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::reduce_sum(v[0], ops::AxesSpatial); },
                     {rnd<T>(rng, Shape{3, 2, 4, 5})});
  }
  if (name == "reduce_mean") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::reduce_mean(v[0], ops::AxisN | ops::AxisC); },
                     {rnd<T>(rng, Shape{3, 2, 4, 5})});
  }
  if (name == "charbonnier") {
    const auto a = rnd<T>(rng, s);
    Tensor<T> target = away_from_zero<T>(rng, s);
    for (std::size_t i = 0; i < target.numel(); ++i) target[i] += a[i];
    return probe.inputs([](Tape<T>&, const V<T>& v) { return ag::charbonnier(v[0], v[1], T(1e-3)); }, {a, target});
  }
  if (name == "dwt2") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return wavelet::dwt2(v[0]); }, {rnd<T>(rng, Shape{1, 2, 6, 8})});
  }
  if (name == "iwt2") {
    return probe.inputs([](Tape<T>&, const V<T>& v) { return wavelet::iwt2(v[0]); }, {rnd<T>(rng, Shape{1, 8, 3, 4})});
  }
  if (name == "branch_kernel") {
    for (auto b : {dirconv::Branch::Cdc, dirconv::Branch::Adc, dirconv::Branch::Hmdc, dirconv::Branch::Vmdc}) {
      probe.inputs([b](Tape<T>&, const V<T>& v) { return dirconv::branch_kernel(v[0], b); },
                   {rnd<T>(rng, Shape{2, 2, 3, 3})});
    }
    return;
  }

  // Blocks: inputs and every parameter, a sample of coordinates each.
  probe.opts.max_coords = 40;
  auto x = rnd<T>(rng, s);
  if (name == "dac_forward") {
    auto p = blocks::make_dac<T>(4, 4, rng);
    randomize<T>(p, rng);
    return probe.params([&](Tape<T>& t) { return dirconv::dac_forward(t.param(x), p); },
                                           with_params<T>(p, {&x}));
  }
  if (name == "resblock") {
    auto p = blocks::make_resblock<T>(4, rng);
    return probe.params([&](Tape<T>& t) { return blocks::resblock_forward(t.param(x), p); },
                                           with_params<T>(p, {&x}));
  }
  if (name == "fse") {
    auto p = blocks::make_fse<T>(4, rng);
    randomize<T>(p, rng);
    return probe.params([&](Tape<T>& t) { return blocks::fse_forward(t.param(x), p); },
                                           with_params<T>(p, {&x}));
  }
  if (name == "dru") {
    auto p = blocks::make_dru<T>(4, rng);
    randomize<T>(p, rng);
    auto odd = rnd<T>(rng, Shape{1, 4, 7, 5});
    return probe.params([&](Tape<T>& t) { return blocks::dru_forward(t.param(odd), p); },
                                           with_params<T>(p, {&odd}));
  }
  if (name == "dfse") {
    auto p = blocks::make_dfse<T>(4, 4, true, true, rng);
    randomize<T>(p, rng);
    return probe.params([&](Tape<T>& t) { return blocks::dfse_forward(t.param(x), p); },
                                           with_params<T>(p, {&x}));
  }
  if (name == "fsas") {
    auto p = blocks::make_fsas<T>(4, 2, rng);
    randomize<T>(p, rng);
    return probe.params([&](Tape<T>& t) { return blocks::fsas_forward(t.param(x), p); },
                                           with_params<T>(p, {&x}));
  }
  if (name == "fam") {
    auto p = blocks::make_fam<T>(4, 2, rng);
    randomize<T>(p, rng);
    auto x2 = rnd<T>(rng, s);
    return probe.params(
        [&](Tape<T>& t) { return blocks::fam_forward(t.param(x), t.param(x2), p); }, with_params<T>(p, {&x, &x2}));
  }
  if (name == "network") {
    auto model = net::convert<T>(net::MoireNet<float>::build(net::NetworkConfig{}));
    // The zero-initialized head would block every upstream gradient.
    Tensor<T>* shallow = nullptr;
    model.for_each_param([&](const std::string& n, Tensor<T>& t) {
      if (n == "head.weight") t = rnd<T>(rng, t.shape(), -0.05, 0.05);
      if (n == "bottleneck.fsas.a") t[0] = T(0.5);
      if (n == "shallow.weight") shallow = &t;
    });
    const auto img = rnd<T>(rng, Shape{1, 3, 16, 16}, 0, 1);
    probe.opts.max_coords = 24;
    return probe.params([&](Tape<T>& t) { return model.forward(t.constant(img)); }, {shallow});
  }
  throw Error(ErrorCode::BadConfig, "unknown gradcheck op '" + name + "'");
}

Kind kind_of(const std::string& name) {
  static const std::vector<std::string> block_names{"dac_forward", "resblock", "fse", "dru", "dfse", "fsas", "fam"};
  if (name == "network") return Kind::Network;
  if (std::find(block_names.begin(), block_names.end(), name) != block_names.end()) return Kind::Block;
  return Kind::Primitive;
}

}  // namespace

const std::vector<std::string>& names() {
  static const std::vector<std::string> n{
      "conv2d",     "conv2d_strided_grouped", "conv_transpose2d", "pixel_shuffle", "pixel_unshuffle",
      "max_pool",   "avg_pool",               "channel_stats",    "resize_bilinear", "add",
      "sub",        "mul",                    "relu",             "sigmoid",       "scale",
      "mul_scalar", "expand",                 "concat_channels",  "split_channels", "pad_reflect",
      "crop",       "reduce_sum",             "reduce_mean",      "charbonnier",   "dwt2",
      "iwt2",       "branch_kernel",          "dac_forward",      "resblock",      "fse",
      "dru",        "dfse",                   "fsas",             "fam",           "network"};
  return n;
}

Result run(const std::string& name, bool f64) {
  const auto it = std::find(names().begin(), names().end(), name);
  if (it == names().end()) throw Error(ErrorCode::BadConfig, "unknown gradcheck op '" + name + "'");
  const auto seed = 1000 + static_cast<std::uint64_t>(it - names().begin());
  Result r;
  r.name = name;
  r.kind = kind_of(name);
  if (f64) {
    r.threshold = r.kind == Kind::Network ? 1e-2 : 1e-3;
    Probe<double> probe;
    check(name, seed, probe);
    r.max_rel_error = probe.report.max_rel_error;
    r.coords = probe.report.coords;
    return r;
  }
  r.threshold = 1e-3;
  Probe<float> lo;
  Probe<double> hi;
  lo.finite_diff = hi.finite_diff = false;
  check(name, seed, lo);
  check(name, seed, hi);
  double diff = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < hi.grads.size(); ++k) {
    for (std::size_t i = 0; i < hi.grads[k].numel(); ++i) {
      diff = std::max(diff, std::abs(double(lo.grads[k][i]) - hi.grads[k][i]));
      scale = std::max(scale, std::abs(hi.grads[k][i]));
    }
    r.coords += hi.grads[k].numel();
  }
  r.max_rel_error = diff / std::max(scale, 1e-8);
  return r;
}

std::vector<Result> run_all(const std::string& name, bool f64) {
  if (!name.empty()) return {run(name, f64)};
  std::vector<Result> out;
  for (const auto& n : names()) out.push_back(run(n, f64));
  return out;
}

}  // namespace moire::gradcheck
