#pragma once

// Reverse-mode differentiation over the ops:: kernels.
//
// A Tape is an append-only list of nodes; each node keeps its forward value,
// the ids of its inputs and a closure computing input gradients from the
// output gradient. Node ids are topologically ordered by construction, so
// backward() is a single reverse sweep. Gradients meeting at a node are summed.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "moire/ops.hpp"

namespace moire::ag {

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  std::size_t id() const noexcept { return id_; }
  Tape<T>& tape() const noexcept { return *tape_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Returns one gradient per input; an empty tensor means "no contribution".
// `needs[k]` is false for inputs that do not require a gradient.
template <typename T>
using BackwardFn = std::function<std::vector<Tensor<T>>(const Tensor<T>& grad_out, const std::vector<bool>& needs)>;

template <typename T>
using GradMap = std::map<std::string, Tensor<T>>;

template <typename T>
class Tape {
 public:
  // With grad disabled the tape only evaluates: no closures are kept.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> leaf(Tensor<T> value, std::string name = {});
  // Trainable leaf aliasing `value`, which must outlive the tape. The same
  // tensor always maps to the same node.
  Var<T> param(const Tensor<T>& value, std::string name = {});

  Var<T> record(const char* op, Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn<T> backward);

  void backward(Var<T> loss);
  void zero_grad() { grads_.clear(); }

  const Tensor<T>* grad(Var<T> v) const;
  const Tensor<T>* grad_of(const Tensor<T>& param) const;
  Tensor<T> grad_or_zeros(Var<T> v) const;
  // Every named leaf; zeros for leaves the loss does not reach.
  GradMap<T> grads() const;

  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.owned;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const char* op(std::size_t id) const { return nodes_[id].op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

 private:
  struct Node {
    const char* op = "";
    Tensor<T> owned;
    const Tensor<T>* external = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn<T> backward;
    bool requires_grad = false;
    bool is_leaf = false;
    std::string name;
  };

  Var<T> push(Node node);

  bool grad_enabled_;
  std::deque<Node> nodes_;
  std::vector<std::optional<Tensor<T>>> grads_;
  std::unordered_map<const Tensor<T>*, std::size_t> params_;
};

// ---- differentiable operations ------------------------------------------

// `bias` may be an invalid Var for no bias.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, ops::ConvGeometry g);
template <typename T>
Var<T> conv_transpose2d(Var<T> x, Var<T> weight, Var<T> bias, ops::ConvGeometry g);
template <typename T>
Var<T> pixel_shuffle(Var<T> x, int r);
template <typename T>
Var<T> pixel_unshuffle(Var<T> x, int r);
template <typename T>
Var<T> pool2d(Var<T> x, ops::PoolKind kind, int k, int s);
template <typename T>
Var<T> channel_stats(Var<T> x);
template <typename T>
Var<T> resize_bilinear(Var<T> x, std::size_t out_h, std::size_t out_w);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> relu(Var<T> x);
template <typename T>
Var<T> sigmoid(Var<T> x);
template <typename T>
Var<T> scale(Var<T> x, T s);
// x times a learnable scalar held in a (1,1,1,1) node.
template <typename T>
Var<T> mul_scalar(Var<T> x, Var<T> s);
template <typename T>
Var<T> expand(Var<T> x, const Shape& shape);

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts);
template <typename T>
std::vector<Var<T>> split_channels(Var<T> x, const std::vector<std::size_t>& sizes);
template <typename T>
Var<T> pad_reflect(Var<T> x, ops::Padding p);
template <typename T>
Var<T> crop(Var<T> x, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);
template <typename T>
Var<T> reduce_sum(Var<T> x, unsigned axes);
template <typename T>
Var<T> reduce_mean(Var<T> x, unsigned axes);

// mean(sqrt((pred - target)^2 + eps^2)), a (1,1,1,1) node.
template <typename T>
Var<T> charbonnier(Var<T> pred, Var<T> target, T eps);

// ---- gradient verification -----------------------------------------------

template <typename T>
using TapeFn = std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>;

struct GradCheckOptions {
  double step = 1e-3;
  int refine_levels = 3;       // how often the step may shrink by 8x
  double floor = 1e-8;        // denominator floor of the relative error
  std::size_t max_coords = 0;  // per input; 0 checks every coordinate
  std::uint64_t seed = 7;
  std::vector<bool> wrt;       // inputs to check; empty means all
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares backward() against fourth-order central differences of the scalar
// sum(op(inputs) * R) for a fixed random R. The error of one coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, floor). When the estimate
// at `step` and at step/8 disagree, the step keeps shrinking (up to
// refine_levels times) and the last estimate is used.
template <typename T>
GradCheckReport finite_diff_check(const TapeFn<T>& op, const std::vector<Tensor<T>>& inputs,
                                  const GradCheckOptions& opts = {});

// Same check for tensors the op reaches through Tape::param. Each target is
// perturbed in place and restored before returning.
template <typename T>
using ParamFn = std::function<Var<T>(Tape<T>&)>;
template <typename T>
GradCheckReport finite_diff_check_params(const ParamFn<T>& op, const std::vector<Tensor<T>*>& targets,
                                         const GradCheckOptions& opts = {});

}  // namespace moire::ag
