#include "moire/autograd.hpp"

#include <algorithm>
#include <memory>
#include <cmath>

#include "moire/rng.hpp"

namespace moire::ag {

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.op = "constant";
  n.owned = std::move(value);
  n.is_leaf = true;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, std::string name) {
  Node n;
  n.op = "leaf";
  n.owned = std::move(value);
  n.is_leaf = true;
  n.requires_grad = grad_enabled_;
  n.name = std::move(name);
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::param(const Tensor<T>& value, std::string name) {
  if (auto it = params_.find(&value); it != params_.end()) return Var<T>(this, it->second);
  Node n;
  n.op = "param";
  n.external = &value;
  n.is_leaf = true;
  n.requires_grad = grad_enabled_;
  n.name = std::move(name);
  Var<T> v = push(std::move(n));
  params_.emplace(&value, v.id());
  return v;
}

template <typename T>
Var<T> Tape<T>::record(const char* op, Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn<T> backward) {
  Node n;
  n.op = op;
  n.owned = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const auto& v : inputs) {
    if (&v.tape() != this) throw Error(ErrorCode::UnsupportedOp, std::string(op) + ": input from another tape");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (grad_enabled_ && n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (&loss.tape() != this) throw Error(ErrorCode::UnsupportedOp, "loss belongs to another tape");
  if (loss.value().numel() != 1) {
    throw Error(ErrorCode::NotScalarLoss, "loss has shape " + loss.shape().str());
  }
  grads_.assign(nodes_.size(), std::nullopt);
  grads_[loss.id()] = Tensor<T>(loss.shape(), T(1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!grads_[i] || !node.backward) continue;
    std::vector<bool> needs(node.inputs.size());
    for (std::size_t k = 0; k < node.inputs.size(); ++k) needs[k] = nodes_[node.inputs[k]].requires_grad;
    std::vector<Tensor<T>> in_grads = node.backward(*grads_[i], needs);
    for (std::size_t k = 0; k < node.inputs.size() && k < in_grads.size(); ++k) {
      if (!needs[k] || in_grads[k].empty()) continue;
      const std::size_t src = node.inputs[k];
      if (in_grads[k].shape() != value(src).shape()) {
        throw Error(ErrorCode::ShapeMismatch, std::string(node.op) + " backward produced " +
                                                  in_grads[k].shape().str() + " for " + value(src).shape().str());
      }
      auto& slot = grads_[src];
      if (!slot) {
        slot = std::move(in_grads[k]);
      } else {
        T* dst = slot->ptr();
        const T* add = in_grads[k].ptr();
        for (std::size_t e = 0; e < slot->numel(); ++e) dst[e] += add[e];
      }
    }
    if (!node.is_leaf) grads_[i].reset();
  }
}

template <typename T>
const Tensor<T>* Tape<T>::grad(Var<T> v) const {
  if (v.id() >= grads_.size() || !grads_[v.id()]) return nullptr;
  return &*grads_[v.id()];
}

template <typename T>
const Tensor<T>* Tape<T>::grad_of(const Tensor<T>& param) const {
  auto it = params_.find(&param);
  if (it == params_.end()) return nullptr;
  return grad(Var<T>(const_cast<Tape*>(this), it->second));
}

template <typename T>
Tensor<T> Tape<T>::grad_or_zeros(Var<T> v) const {
  if (const Tensor<T>* g = grad(v)) return *g;
  return Tensor<T>(v.shape());
}

template <typename T>
GradMap<T> Tape<T>::grads() const {
  GradMap<T> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (!n.is_leaf || n.name.empty() || !n.requires_grad) continue;
    const bool have = i < grads_.size() && grads_[i].has_value();
    out.insert_or_assign(n.name, have ? *grads_[i] : Tensor<T>(value(i).shape()));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {
template <typename T>
std::vector<Tensor<T>> one(Tensor<T> g) {
  std::vector<Tensor<T>> v;
  v.push_back(std::move(g));
  return v;
}
}  // namespace

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, ops::ConvGeometry g) {
  static const Tensor<T> kNoBias;
  Tape<T>& t = x.tape();
  const bool has_bias = bias.valid();
  Tensor<T> y = ops::conv2d(x.value(), weight.value(), has_bias ? bias.value() : kNoBias, g);
  std::vector<Var<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  const std::size_t xi = x.id(), wi = weight.id();
  const Shape bias_shape = has_bias ? bias.shape() : Shape{};
  return t.record("conv2d", std::move(y), inputs,
                  [&t, xi, wi, g, has_bias, bias_shape](const Tensor<T>& gy, const std::vector<bool>& needs) {
                    std::vector<Tensor<T>> out(has_bias ? 3 : 2);
                    const Tensor<T>& xv = t.value(xi);
                    const Tensor<T>& wv = t.value(wi);
                    if (needs[0]) out[0] = ops::conv2d_grad_input(gy, wv, xv.shape(), g);
                    if (needs[1]) out[1] = ops::conv2d_grad_weight(gy, xv, wv.shape(), g);
                    if (has_bias && needs[2]) out[2] = ops::bias_grad(gy).reshaped(bias_shape);
                    return out;
                  });
}

template <typename T>
Var<T> conv_transpose2d(Var<T> x, Var<T> weight, Var<T> bias, ops::ConvGeometry g) {
  static const Tensor<T> kNoBias;
  Tape<T>& t = x.tape();
  const bool has_bias = bias.valid();
  Tensor<T> y = ops::conv_transpose2d(x.value(), weight.value(), has_bias ? bias.value() : kNoBias, g);
  std::vector<Var<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  const std::size_t xi = x.id(), wi = weight.id();
  const Shape bias_shape = has_bias ? bias.shape() : Shape{};
  return t.record("conv_transpose2d", std::move(y), inputs,
                  [&t, xi, wi, g, has_bias, bias_shape](const Tensor<T>& gy, const std::vector<bool>& needs) {
                    static const Tensor<T> kNone;
                    std::vector<Tensor<T>> out(has_bias ? 3 : 2);
                    const Tensor<T>& xv = t.value(xi);
                    const Tensor<T>& wv = t.value(wi);
                    // The transposed conv is the adjoint of conv2d(gy-shaped input, w).
                    if (needs[0]) out[0] = ops::conv2d(gy, wv, kNone, g);
                    if (needs[1]) out[1] = ops::conv2d_grad_weight(xv, gy, wv.shape(), g);
                    if (has_bias && needs[2]) out[2] = ops::bias_grad(gy).reshaped(bias_shape);
                    return out;
                  });
}

template <typename T>
Var<T> pixel_shuffle(Var<T> x, int r) {
  return x.tape().record("pixel_shuffle", ops::pixel_shuffle(x.value(), r), {x},
                         [r](const Tensor<T>& gy, const std::vector<bool>&) { return one(ops::pixel_unshuffle(gy, r)); });
}

template <typename T>
Var<T> pixel_unshuffle(Var<T> x, int r) {
  return x.tape().record("pixel_unshuffle", ops::pixel_unshuffle(x.value(), r), {x},
                         [r](const Tensor<T>& gy, const std::vector<bool>&) { return one(ops::pixel_shuffle(gy, r)); });
}

template <typename T>
Var<T> pool2d(Var<T> x, ops::PoolKind kind, int k, int s) {
  Tape<T>& t = x.tape();
  const std::size_t xi = x.id();
  return t.record("pool2d", ops::pool2d(x.value(), kind, k, s), {x},
                  [&t, xi, kind, k, s](const Tensor<T>& gy, const std::vector<bool>&) {
                    return one(ops::pool2d_grad(gy, t.value(xi), kind, k, s));
                  });
}

template <typename T>
Var<T> channel_stats(Var<T> x) {
  Tape<T>& t = x.tape();
  const std::size_t xi = x.id();
  return t.record("channel_stats", ops::channel_stats(x.value()), {x},
                  [&t, xi](const Tensor<T>& gy, const std::vector<bool>&) {
                    return one(ops::channel_stats_grad(gy, t.value(xi)));
                  });
}

template <typename T>
Var<T> resize_bilinear(Var<T> x, std::size_t out_h, std::size_t out_w) {
  const Shape in = x.shape();
  return x.tape().record("resize_bilinear", ops::resize_bilinear(x.value(), out_h, out_w), {x},
                         [in](const Tensor<T>& gy, const std::vector<bool>&) {
                           return one(ops::resize_bilinear_grad(gy, in));
                         });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  const Shape sb = b.shape();
  return a.tape().record("add", ops::ewise(a.value(), b.value(), ops::Binary::Add), {a, b},
                         [sb](const Tensor<T>& gy, const std::vector<bool>& needs) {
                           std::vector<Tensor<T>> out(2);
                           if (needs[0]) out[0] = gy;
                           if (needs[1]) out[1] = sb == gy.shape() ? gy : ops::reduce_to(gy, sb);
                           return out;
                         });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  const Shape sb = b.shape();
  return a.tape().record("sub", ops::ewise(a.value(), b.value(), ops::Binary::Sub), {a, b},
                         [sb](const Tensor<T>& gy, const std::vector<bool>& needs) {
                           std::vector<Tensor<T>> out(2);
                           if (needs[0]) out[0] = gy;
                           if (needs[1]) {
                             Tensor<T> neg = ops::scalar_mul(gy, T(-1));
                             out[1] = sb == gy.shape() ? std::move(neg) : ops::reduce_to(neg, sb);
                           }
                           return out;
                         });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& t = a.tape();
  const std::size_t ai = a.id(), bi = b.id();
  return t.record("mul", ops::ewise(a.value(), b.value(), ops::Binary::Mul), {a, b},
                  [&t, ai, bi](const Tensor<T>& gy, const std::vector<bool>& needs) {
                    std::vector<Tensor<T>> out(2);
                    const Tensor<T>& av = t.value(ai);
                    const Tensor<T>& bv = t.value(bi);
                    if (needs[0]) out[0] = ops::ewise(gy, bv, ops::Binary::Mul);
                    if (needs[1]) {
                      Tensor<T> prod = ops::ewise(gy, av, ops::Binary::Mul);
                      out[1] = bv.shape() == prod.shape() ? std::move(prod) : ops::reduce_to(prod, bv.shape());
                    }
                    return out;
                  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tape<T>& t = x.tape();
  const std::size_t xi = x.id();
  return t.record("relu", ops::activation(x.value(), ops::Activation::Relu), {x},
                  [&t, xi](const Tensor<T>& gy, const std::vector<bool>&) {
                    const Tensor<T>& xv = t.value(xi);
                    return one(ops::activation_grad(gy, xv, xv, ops::Activation::Relu));
                  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tape<T>& t = x.tape();
  Tensor<T> y = ops::activation(x.value(), ops::Activation::Sigmoid);
  // The closure needs the output; keep a copy only when a backward pass can happen.
  auto saved = std::make_shared<Tensor<T>>();
  if (t.grad_enabled() && t.requires_grad(x.id())) *saved = y;
  return t.record("sigmoid", std::move(y), {x}, [saved](const Tensor<T>& gy, const std::vector<bool>&) {
    return one(ops::activation_grad(gy, *saved, *saved, ops::Activation::Sigmoid));
  });
}

template <typename T>
Var<T> scale(Var<T> x, T s) {
  return x.tape().record("scale", ops::scalar_mul(x.value(), s), {x},
                         [s](const Tensor<T>& gy, const std::vector<bool>&) { return one(ops::scalar_mul(gy, s)); });
}

template <typename T>
Var<T> mul_scalar(Var<T> x, Var<T> s) {
  if (s.value().numel() != 1) throw Error(ErrorCode::ShapeMismatch, "mul_scalar expects a single value, got " + s.shape().str());
  Tape<T>& t = x.tape();
  const std::size_t xi = x.id(), si = s.id();
  return t.record("mul_scalar", ops::scalar_mul(x.value(), s.value()[0]), {x, s},
                  [&t, xi, si](const Tensor<T>& gy, const std::vector<bool>& needs) {
                    std::vector<Tensor<T>> out(2);
                    if (needs[0]) out[0] = ops::scalar_mul(gy, t.value(si)[0]);
                    if (needs[1]) out[1] = Tensor<T>(t.value(si).shape(), ops::dot(gy, t.value(xi)));
                    return out;
                  });
}

template <typename T>
Var<T> expand(Var<T> x, const Shape& shape) {
  const Shape in = x.shape();
  return x.tape().record("expand", ops::expand(x.value(), shape), {x},
                         [in](const Tensor<T>& gy, const std::vector<bool>&) { return one(ops::reduce_to(gy, in)); });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat of nothing");
  std::vector<const Tensor<T>*> values;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    values.push_back(&p.value());
    sizes.push_back(p.shape().c);
  }
  return parts.front().tape().record("concat_channels", ops::concat_channels(values), parts,
                                     [sizes](const Tensor<T>& gy, const std::vector<bool>&) {
                                       return ops::split_channels(gy, sizes);
                                     });
}

template <typename T>
std::vector<Var<T>> split_channels(Var<T> x, const std::vector<std::size_t>& sizes) {
  std::vector<Tensor<T>> parts = ops::split_channels(x.value(), sizes);
  std::vector<Var<T>> out;
  std::size_t at = 0;
  const Shape in = x.shape();
  for (auto& part : parts) {
    const std::size_t start = at;
    const std::size_t count = part.c();
    out.push_back(x.tape().record("split_channels", std::move(part), {x},
                                  [in, start, count](const Tensor<T>& gy, const std::vector<bool>&) {
                                    Tensor<T> g(in);
                                    const std::size_t hw = in.plane();
                                    for (std::size_t n = 0; n < in.n; ++n)
                                      std::copy_n(gy.plane(n, 0), count * hw, g.plane(n, start));
                                    return one(std::move(g));
                                  }));
    at += count;
  }
  return out;
}

template <typename T>
Var<T> pad_reflect(Var<T> x, ops::Padding p) {
  const Shape in = x.shape();
  return x.tape().record("pad_reflect", ops::pad_reflect(x.value(), p), {x},
                         [in, p](const Tensor<T>& gy, const std::vector<bool>&) {
                           return one(ops::pad_reflect_grad(gy, p, in));
                         });
}

template <typename T>
Var<T> crop(Var<T> x, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  const Shape in = x.shape();
  return x.tape().record("crop", ops::crop(x.value(), y0, x0, h, w), {x},
                         [in, y0, x0](const Tensor<T>& gy, const std::vector<bool>&) {
                           return one(ops::crop_grad(gy, y0, x0, in));
                         });
}

template <typename T>
Var<T> reduce_sum(Var<T> x, unsigned axes) {
  const Shape in = x.shape();
  return x.tape().record("reduce_sum", ops::reduce_sum(x.value(), axes), {x},
                         [in](const Tensor<T>& gy, const std::vector<bool>&) { return one(ops::expand(gy, in)); });
}

template <typename T>
Var<T> reduce_mean(Var<T> x, unsigned axes) {
  const Shape in = x.shape();
  const Shape rs = ops::reduced_shape(in, axes);
  const T inv = static_cast<T>(static_cast<double>(rs.numel()) / static_cast<double>(in.numel()));
  Tensor<T> y = ops::reduce_mean(x.value(), axes);
  return x.tape().record("reduce_mean", std::move(y), {x}, [in, inv](const Tensor<T>& gy, const std::vector<bool>&) {
    return one(ops::scalar_mul(ops::expand(gy, in), inv));
  });
}

template <typename T>
Var<T> charbonnier(Var<T> pred, Var<T> target, T eps) {
  if (pred.shape() != target.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "charbonnier " + pred.shape().str() + " vs " + target.shape().str());
  }
  Tape<T>& t = pred.tape();
  const std::size_t pi = pred.id(), ti = target.id();
  const Tensor<T>& p = pred.value();
  const Tensor<T>& q = target.value();
  const double e2 = double(eps) * double(eps);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    const double d = double(p[i]) - double(q[i]);
    acc += std::sqrt(d * d + e2);
  }
  const double count = static_cast<double>(p.numel());
  return t.record("charbonnier", Tensor<T>::scalar(static_cast<T>(acc / count)), {pred, target},
                  [&t, pi, ti, e2, count](const Tensor<T>& gy, const std::vector<bool>& needs) {
                    const Tensor<T>& pv = t.value(pi);
                    const Tensor<T>& tv = t.value(ti);
                    Tensor<T> g(pv.shape());
                    const double s = double(gy[0]) / count;
                    for (std::size_t i = 0; i < pv.numel(); ++i) {
                      const double d = double(pv[i]) - double(tv[i]);
                      g[i] = static_cast<T>(s * d / std::sqrt(d * d + e2));
                    }
                    std::vector<Tensor<T>> out(2);
                    if (needs[1]) out[1] = ops::scalar_mul(g, T(-1));
                    if (needs[0]) out[0] = std::move(g);
                    return out;
                  });
}

// ---------------------------------------------------------------------------

namespace {

// Fourth-order central difference of sum(y * proj), differenced per element
// before projecting so structurally zero derivatives stay near zero.
template <typename T>
double stencil(const Tensor<T>& p2, const Tensor<T>& p1, const Tensor<T>& m1, const Tensor<T>& m2,
               const Tensor<T>& proj, double h) {
  double acc = 0.0;
  for (std::size_t i = 0; i < proj.numel(); ++i) {
    const double d = (double(m2[i]) - double(p2[i])) + 8.0 * (double(p1[i]) - double(m1[i]));
    acc += d * double(proj[i]);
  }
  return acc / (12.0 * h);
}

// Shrinks the step by 8x until two successive estimates agree, so a relu kink
// inside the stencil window does not masquerade as a wrong gradient.
template <typename F>
double refined_derivative(F&& at_step, double h, int levels) {
  double prev = at_step(h);
  for (int level = 0; level < levels; ++level) {
    h /= 8.0;
    const double next = at_step(h);
    const double scale = std::max(std::abs(prev), std::abs(next));
    if (std::abs(prev - next) <= std::max(1e-5 * scale, 1e-10)) return prev;
    prev = next;
  }
  return prev;
}

}  // namespace

template <typename T>
GradCheckReport finite_diff_check(const TapeFn<T>& op, const std::vector<Tensor<T>>& inputs,
                                  const GradCheckOptions& opts) {
  Tape<T> tape;
  std::vector<Var<T>> leaves;
  for (const auto& in : inputs) leaves.push_back(tape.leaf(in));
  Var<T> out = op(tape, leaves);
  Rng rng(opts.seed);
  const Tensor<T> proj = rng.uniform_tensor<T>(out.shape(), -1.0, 1.0);
  Var<T> loss = reduce_sum(mul(out, tape.constant(proj)), ops::AxesAll);
  tape.backward(loss);

  auto evaluate = [&](const std::vector<Tensor<T>>& xs) {
    Tape<T> t(false);
    std::vector<Var<T>> vs;
    for (const auto& x : xs) vs.push_back(t.constant(x));
    return op(t, vs).value();
  };

  GradCheckReport report;
  std::vector<Tensor<T>> work = inputs;
  const double h = opts.step;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!opts.wrt.empty() && (k >= opts.wrt.size() || !opts.wrt[k])) continue;
    const Tensor<T> analytic = tape.grad_or_zeros(leaves[k]);
    const std::size_t total = inputs[k].numel();
    const std::size_t stride = (opts.max_coords == 0 || total <= opts.max_coords) ? 1 : total / opts.max_coords;
    for (std::size_t i = 0; i < total; i += stride) {
      const T orig = work[k][i];
      auto at = [&](double delta) {
        work[k][i] = static_cast<T>(double(orig) + delta);
        return evaluate(work);
      };
      const double numeric =
          refined_derivative([&](double st) { return stencil(at(2 * st), at(st), at(-st), at(-2 * st), proj, st); }, h,
                             opts.refine_levels);
      work[k][i] = orig;
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      ++report.coords;
    }
  }
  return report;
}

template <typename T>
GradCheckReport finite_diff_check_params(const ParamFn<T>& op, const std::vector<Tensor<T>*>& targets,
                                         const GradCheckOptions& opts) {
  Tape<T> tape;
  for (Tensor<T>* t : targets) tape.param(*t);
  Var<T> out = op(tape);
  Rng rng(opts.seed);
  const Tensor<T> proj = rng.uniform_tensor<T>(out.shape(), -1.0, 1.0);
  tape.backward(reduce_sum(mul(out, tape.constant(proj)), ops::AxesAll));

  auto evaluate = [&] {
    Tape<T> t(false);
    return op(t).value();
  };

  GradCheckReport report;
  const double h = opts.step;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (!opts.wrt.empty() && (k >= opts.wrt.size() || !opts.wrt[k])) continue;
    Tensor<T>& target = *targets[k];
    const Tensor<T>* g = tape.grad_of(target);
    const Tensor<T> analytic = g ? *g : Tensor<T>(target.shape());
    const std::size_t total = target.numel();
    const std::size_t stride = (opts.max_coords == 0 || total <= opts.max_coords) ? 1 : total / opts.max_coords;
    for (std::size_t i = 0; i < total; i += stride) {
      const T orig = target[i];
      auto at = [&](double delta) {
        target[i] = static_cast<T>(double(orig) + delta);
        return evaluate();
      };
      const double numeric =
          refined_derivative([&](double st) { return stencil(at(2 * st), at(st), at(-st), at(-2 * st), proj, st); }, h,
                             opts.refine_levels);
      target[i] = orig;
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      ++report.coords;
    }
  }
  return report;
}

#define MOIRE_INSTANTIATE_AG(T)                                                                          \
  template class Tape<T>;                                                                                \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, ops::ConvGeometry);                                      \
  template Var<T> conv_transpose2d(Var<T>, Var<T>, Var<T>, ops::ConvGeometry);                            \
  template Var<T> pixel_shuffle(Var<T>, int);                                                             \
  template Var<T> pixel_unshuffle(Var<T>, int);                                                           \
  template Var<T> pool2d(Var<T>, ops::PoolKind, int, int);                                                \
  template Var<T> channel_stats(Var<T>);                                                                  \
  template Var<T> resize_bilinear(Var<T>, std::size_t, std::size_t);                                      \
  template Var<T> add(Var<T>, Var<T>);                                                                    \
  template Var<T> sub(Var<T>, Var<T>);                                                                    \
  template Var<T> mul(Var<T>, Var<T>);                                                                    \
  template Var<T> relu(Var<T>);                                                                           \
  template Var<T> sigmoid(Var<T>);                                                                        \
  template Var<T> scale(Var<T>, T);                                                                       \
  template Var<T> mul_scalar(Var<T>, Var<T>);                                                             \
  template Var<T> expand(Var<T>, const Shape&);                                                           \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                                            \
  template std::vector<Var<T>> split_channels(Var<T>, const std::vector<std::size_t>&);                   \
  template Var<T> pad_reflect(Var<T>, ops::Padding);                                                      \
  template Var<T> crop(Var<T>, std::size_t, std::size_t, std::size_t, std::size_t);                       \
  template Var<T> reduce_sum(Var<T>, unsigned);                                                           \
  template Var<T> reduce_mean(Var<T>, unsigned);                                                          \
  template Var<T> charbonnier(Var<T>, Var<T>, T);                                                         \
  template GradCheckReport finite_diff_check(const TapeFn<T>&, const std::vector<Tensor<T>>&, const GradCheckOptions&); \
  template GradCheckReport finite_diff_check_params(const ParamFn<T>&, const std::vector<Tensor<T>*>&,             \
                                                    const GradCheckOptions&);

MOIRE_INSTANTIATE_AG(float)
MOIRE_INSTANTIATE_AG(double)

}  // namespace moire::ag
