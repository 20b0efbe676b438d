#include "moire/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace moire::train {

namespace {

using net::MoireNet;

nlohmann::json db_json(double db) {
  if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
  return db;
}

nlohmann::json metric_json(const metrics::MetricReport& m) {
  return nlohmann::json{{"psnr", db_json(m.psnr_db)}, {"ssim", m.ssim}};
}

data::Image clamp_image(data::Image img) {
  for (float& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

// Stacks (1,3,h,w) images into one batch.
Tensor<float> stack(const std::vector<const data::Image*>& items) {
  const Shape one = items.front()->shape();
  Tensor<float> out(Shape{items.size(), one.c, one.h, one.w});
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i]->shape() != one) {
      throw Error(ErrorCode::ShapeMismatch, "batch mixes " + one.str() + " and " + items[i]->shape().str());
    }
    std::copy(items[i]->ptr(), items[i]->ptr() + one.numel(), out.ptr() + i * one.numel());
  }
  return out;
}

}  // namespace

// ---- config --------------------------------------------------------------

void TrainConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::BadConfig, msg); };
  if (!(lr_max > 0.0) || !std::isfinite(lr_max)) bad("lr_max must be positive");
  if (!(min_lr() >= 0.0) || min_lr() > lr_max) bad("lr_min must lie in [0, lr_max]");
  if (batch < 1) bad("batch must be at least 1");
  if (cycles < 1) bad("cycles must be at least 1");
  if (!(loss_epsilon > 0.0)) bad("loss_epsilon must be positive");
  if (!(fraction > 0.0 && fraction <= 1.0)) bad("fraction must lie in (0, 1]");
  if (!(clip_norm >= 0.0)) bad("clip_norm must be non-negative");
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k{"lr_max", "lr_min",       "epochs",   "batch",    "cycles",
                                          "seed",   "loss_epsilon", "fraction", "clip_norm"};
  return k;
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"lr_max", lr_max},   {"lr_min", min_lr()},         {"epochs", epochs},
                        {"batch", batch},     {"cycles", cycles},           {"seed", seed},
                        {"loss_epsilon", loss_epsilon}, {"fraction", fraction}, {"clip_norm", clip_norm}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "train config must be a JSON object");
  TrainConfig c;
  try {
    if (j.contains("lr_max")) c.lr_max = j.at("lr_max").get<double>();
    if (j.contains("lr_min") && !j.at("lr_min").is_null()) c.lr_min = j.at("lr_min").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch")) c.batch = j.at("batch").get<std::size_t>();
    if (j.contains("cycles")) c.cycles = j.at("cycles").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("loss_epsilon")) c.loss_epsilon = j.at("loss_epsilon").get<double>();
    if (j.contains("fraction")) c.fraction = j.at("fraction").get<double>();
    if (j.contains("clip_norm")) c.clip_norm = j.at("clip_norm").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, e.what());
  }
  return c;
}

// ---- pieces --------------------------------------------------------------

template <typename T>
double charbonnier_loss(const Tensor<T>& pred, const Tensor<T>& target, double eps) {
  ag::Tape<T> tape(false);
  return static_cast<double>(
      ag::charbonnier(tape.constant(pred), tape.constant(target), static_cast<T>(eps)).value()[0]);
}

template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               double lr) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam_step got " + std::to_string(params.size()) + " parameters and " +
                                              std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const Tensor<T>* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "adam state tracks other parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->shape() != grads[k].shape() || state.m[k].shape() != grads[k].shape()) {
      throw Error(ErrorCode::ShapeMismatch, "adam_step: parameter " + params[k]->shape().str() + ", gradient " +
                                                grads[k].shape().str());
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, eps = state.eps;
  for (std::size_t k = 0; k < params.size(); ++k) {
    T* __restrict p = params[k]->ptr();
    T* __restrict m = state.m[k].ptr();
    T* __restrict v = state.v[k].ptr();
    const T* __restrict g = grads[k].ptr();
    const std::size_t count = grads[k].numel();
#pragma omp simd
    for (std::size_t i = 0; i < count; ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      p[i] = static_cast<T>(p[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  const double lo = cfg.min_lr(), hi = cfg.lr_max;
  const double period = static_cast<double>(std::max<std::size_t>(total_steps, 1)) / static_cast<double>(cfg.cycles);
  const double phase = std::fmod(static_cast<double>(step), period) / period;
  return lo + 0.5 * (hi - lo) * (1.0 + std::cos(std::numbers::pi * phase));
}

// ---- evaluation ----------------------------------------------------------

EvalReport evaluate(const MoireNet<float>& net, const std::vector<data::Pair>& pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyDataset, "nothing to evaluate");
  EvalReport r;
  r.count = pairs.size();
  for (const auto& p : pairs) {
    const data::Image out = clamp_image(net.forward(p.moire));
    const metrics::MetricReport m{metrics::psnr(out, p.clean), metrics::ssim(out, p.clean)};
    r.per_image.push_back(m);
    r.model.psnr_db += m.psnr_db;
    r.model.ssim += m.ssim;
    r.input.psnr_db += metrics::psnr(p.moire, p.clean);
    r.input.ssim += metrics::ssim(p.moire, p.clean);
  }
  const double n = static_cast<double>(pairs.size());
  r.model.psnr_db /= n;
  r.model.ssim /= n;
  r.input.psnr_db /= n;
  r.input.ssim /= n;
  return r;
}

EvalReport evaluate(const MoireNet<float>& net, const std::string& dataset_dir) {
  return evaluate(net, data::load_dataset(dataset_dir));
}

// ---- training ------------------------------------------------------------

nlohmann::json TrainReport::to_json() const {
  nlohmann::json per_epoch = nlohmann::json::array();
  for (const auto& e : epochs) {
    per_epoch.push_back({{"epoch", e.epoch},
                         {"loss", e.loss},
                         {"lr", e.lr},
                         {"val_psnr", db_json(e.val_psnr)},
                         {"val_ssim", e.val_ssim}});
  }
  return nlohmann::json{{"config", config},          {"train_pairs", train_pairs}, {"val_pairs", val_pairs},
                        {"steps", steps},            {"epochs", per_epoch},        {"best_epoch", best_epoch},
                        {"best", metric_json(best)}, {"input", metric_json(input)}};
}

TrainReport train(MoireNet<float>& net, const std::string& dataset_dir, const TrainConfig& cfg,
                  const std::string& checkpoint, std::ostream* log) {
  cfg.validate();
  return train(net, data::load_dataset(dataset_dir), cfg, checkpoint, log);
}

TrainReport train(MoireNet<float>& net, const std::vector<data::Pair>& pairs, const TrainConfig& cfg,
                  const std::string& checkpoint, std::ostream* log) {
  cfg.validate();
  if (pairs.empty()) throw Error(ErrorCode::EmptyDataset, "no training pairs");

  const std::size_t held = pairs.size() / 10;
  const std::size_t available = pairs.size() - held;
  const auto used = std::max<std::size_t>(
      1, std::min(available, static_cast<std::size_t>(std::llround(cfg.fraction * static_cast<double>(available)))));
  const std::vector<data::Pair> train_set(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(used));
  const std::vector<data::Pair> val_set =
      held > 0 ? std::vector<data::Pair>(pairs.end() - static_cast<std::ptrdiff_t>(held), pairs.end()) : train_set;

  TrainReport report;
  nlohmann::json config = net.config().to_json();
  config.update(cfg.to_json());
  report.config = config;
  report.train_pairs = train_set.size();
  report.val_pairs = val_set.size();
  const std::size_t steps_per_epoch = (train_set.size() + cfg.batch - 1) / cfg.batch;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;

  const EvalReport initial = evaluate(net, val_set);
  report.input = initial.input;
  report.best = initial.model;
  net::save_checkpoint(net, checkpoint);

  std::vector<Tensor<float>*> params;
  net.for_each_param([&](const std::string&, Tensor<float>& t) { params.push_back(&t); });
  AdamState<float> adam;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    double lr = cfg.lr_max;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      std::vector<const data::Image*> inputs, targets;
      for (std::size_t k = start; k < stop; ++k) {
        inputs.push_back(&train_set[order[k]].moire);
        targets.push_back(&train_set[order[k]].clean);
      }
      ag::Tape<float> tape;
      const ag::Var<float> pred = net.forward(tape.constant(stack(inputs)));
      const ag::Var<float> loss =
          ag::charbonnier(pred, tape.constant(stack(targets)), static_cast<float>(cfg.loss_epsilon));
      tape.backward(loss);
      loss_sum += static_cast<double>(loss.value()[0]) * static_cast<double>(stop - start);

      std::vector<Tensor<float>> grads;
      grads.reserve(params.size());
      double sq = 0.0;
      for (Tensor<float>* p : params) {
        const Tensor<float>* g = tape.grad_of(*p);
        grads.push_back(g ? *g : Tensor<float>(p->shape()));
        const float* gv = grads.back().ptr();
        const std::size_t count = grads.back().numel();
#pragma omp simd reduction(+ : sq)
        for (std::size_t i = 0; i < count; ++i) sq += static_cast<double>(gv[i]) * gv[i];
      }
      const double norm = std::sqrt(sq);
      if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
        const auto scale = static_cast<float>(cfg.clip_norm / norm);
        for (auto& g : grads)
          for (float& v : g.data()) v *= scale;
      }
      lr = cosine_lr(step, total_steps, cfg);
      adam_step(params, grads, adam, lr);
      ++step;
    }

    const EvalReport val = evaluate(net, val_set);
    EpochStats stats{epoch, loss_sum / static_cast<double>(order.size()), lr, val.model.psnr_db, val.model.ssim};
    report.epochs.push_back(stats);
    if (val.model.psnr_db > report.best.psnr_db) {
      report.best = val.model;
      report.best_epoch = epoch;
      net::save_checkpoint(net, checkpoint);
    }
    if (log) {
      *log << "epoch " << epoch << "/" << cfg.epochs << "  loss " << stats.loss << "  lr " << stats.lr
           << "  val PSNR " << metrics::format_db(stats.val_psnr) << " dB  SSIM " << stats.val_ssim << "\n"
           << std::flush;
    }
  }
  report.steps = step;
  return report;
}

template double charbonnier_loss(const Tensor<float>&, const Tensor<float>&, double);
template double charbonnier_loss(const Tensor<double>&, const Tensor<double>&, double);
template void adam_step(const std::vector<Tensor<float>*>&, const std::vector<Tensor<float>>&, AdamState<float>&,
                        double);
template void adam_step(const std::vector<Tensor<double>*>&, const std::vector<Tensor<double>>&, AdamState<double>&,
                        double);

}  // namespace moire::train
