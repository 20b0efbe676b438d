#pragma once

// Desk-scale training: Charbonnier loss, Adam, cyclic cosine annealing, a
// fixed held-out split and per-epoch validation.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moire/datagen.hpp"
#include "moire/metrics.hpp"
#include "moire/network.hpp"

namespace moire::train {

struct TrainConfig {
  double lr_max = 5e-5;
  std::optional<double> lr_min;  // lr_max / 100 when unset
  std::size_t epochs = 30;
  std::size_t batch = 2;
  std::size_t cycles = 1;
  std::uint64_t seed = 0;
  double loss_epsilon = 1e-3;
  double fraction = 1.0;   // share of the training pairs used
  double clip_norm = 1.0;  // global L2 gradient clip; 0 disables

  double min_lr() const { return lr_min.value_or(lr_max / 100.0); }
  // Throws BadConfig.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; keys outside the config are ignored.
  static TrainConfig from_json(const nlohmann::json& j);
  static const std::vector<std::string>& keys();
};

// mean(sqrt(d^2 + eps^2)), d = pred - target. Throws ShapeMismatch.
template <typename T>
double charbonnier_loss(const Tensor<T>& pred, const Tensor<T>& target, double eps);

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;
  std::size_t t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Bias-corrected Adam update in place. Moments are created on the first call.
// Throws ShapeMismatch.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               double lr);

// Cosine from lr_max to min_lr() over total_steps / cycles steps, restarting
// at every cycle boundary.
double cosine_lr(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double lr = 0.0;  // at the last step of the epoch
  double val_psnr = 0.0;
  double val_ssim = 0.0;
};

struct TrainReport {
  nlohmann::json config;
  std::size_t train_pairs = 0;
  std::size_t val_pairs = 0;
  std::size_t steps = 0;
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 0: the initial weights were kept
  metrics::MetricReport best;
  metrics::MetricReport input;  // held-out moire inputs against clean

  nlohmann::json to_json() const;
};

struct EvalReport {
  metrics::MetricReport model;
  metrics::MetricReport input;
  std::vector<metrics::MetricReport> per_image;  // model outputs, dataset order
  std::size_t count = 0;
};

// Outputs are clamped to [0, 1] before scoring, as exported images are.
EvalReport evaluate(const net::MoireNet<float>& net, const std::vector<data::Pair>& pairs);
// Throws IoError, EmptyDataset.
EvalReport evaluate(const net::MoireNet<float>& net, const std::string& dataset_dir);

// Last 10% of the pairs (by name order) are held out; with fewer than 10
// pairs the training pairs double as validation. Trains `net` in place and
// writes the weights with the best held-out PSNR to `checkpoint`. Progress
// goes to `log` when given. Throws EmptyDataset, IoError, BadConfig.
TrainReport train(net::MoireNet<float>& net, const std::string& dataset_dir, const TrainConfig& cfg,
                  const std::string& checkpoint, std::ostream* log = nullptr);
TrainReport train(net::MoireNet<float>& net, const std::vector<data::Pair>& pairs, const TrainConfig& cfg,
                  const std::string& checkpoint, std::ostream* log = nullptr);

}  // namespace moire::train
