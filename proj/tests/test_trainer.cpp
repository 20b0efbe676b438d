#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <sstream>

#include "moire/trainer.hpp"

using namespace moire;
using namespace moire::train;

namespace {

net::NetworkConfig tiny() {
  net::NetworkConfig c;
  c.widths = {8, 16, 16};
  c.groups = 2;
  c.seed = 5;
  return c;
}

std::vector<data::Pair> pairs(std::size_t n, std::size_t size = 16) {
  std::vector<data::Pair> out;
  data::SynthConfig sc;
  sc.size = size;
  sc.amplitude = 0.3;
  for (std::size_t i = 0; i < n; ++i) {
    sc.seed = 100 + i;
    const auto p = data::synthesize_pair(data::synth_base(data::pair_seed(7, i), size), sc);
    out.push_back({std::to_string(i), p.clean, p.moire});
  }
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("moire_trainer_" + name)).string();
}

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("charbonnier loss closed forms") {
  Tensor<double> a(Shape{1, 3, 2, 2});
  CHECK(charbonnier_loss(a, a, 1e-3) == doctest::Approx(1e-3).epsilon(1e-12));
  Tensor<double> b = a;
  for (double& v : b.data()) v = 1.0;
  CHECK(charbonnier_loss(b, a, 1e-3) == doctest::Approx(std::sqrt(1.0 + 1e-6)).epsilon(1e-12));
  // Half the entries off by 2.
  Tensor<double> c = a;
  for (std::size_t i = 0; i < c.numel(); i += 2) c[i] = 2.0;
  CHECK(charbonnier_loss(c, a, 0.5) == doctest::Approx(0.5 * (0.5 + std::sqrt(4.25))).epsilon(1e-12));
  CHECK_THROWS_AS(charbonnier_loss(a, Tensor<double>(Shape{1, 3, 2, 3}), 1e-3), Error);
}

TEST_CASE("adam first steps") {
  Tensor<double> p(Shape{1, 1, 1, 1}, std::vector<double>{1.0});
  std::vector<Tensor<double>*> params{&p};
  AdamState<double> st;
  adam_step(params, {Tensor<double>(Shape{1, 1, 1, 1}, std::vector<double>{0.5})}, st, 0.1);
  // Bias correction makes the first step lr * sign(g).
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-7));
  adam_step(params, {Tensor<double>(Shape{1, 1, 1, 1}, std::vector<double>{0.5})}, st, 0.1);
  CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-7));
  CHECK(st.t == 2);

  Tensor<double> q(Shape{1, 2, 1, 1}, std::vector<double>{3.0, -1.0});
  std::vector<Tensor<double>*> qs{&q};
  AdamState<double> s2;
  adam_step(qs, {Tensor<double>(Shape{1, 2, 1, 1})}, s2, 0.1);
  CHECK(q[0] == 3.0);
  CHECK(q[1] == -1.0);

  CHECK_THROWS_AS(adam_step(qs, {Tensor<double>(Shape{1, 3, 1, 1})}, s2, 0.1), Error);
  CHECK_THROWS_AS(adam_step(qs, {}, s2, 0.1), Error);
}

TEST_CASE("adam against a hand-rolled recurrence") {
  Tensor<double> p(Shape{1, 1, 1, 1}, std::vector<double>{0.0});
  std::vector<Tensor<double>*> params{&p};
  AdamState<double> st;
  double m = 0, v = 0, x = 0;
  const double grads[] = {1.0, -2.0, 0.25, 3.0};
  for (int t = 1; t <= 4; ++t) {
    const double g = grads[t - 1];
    adam_step(params, {Tensor<double>(Shape{1, 1, 1, 1}, std::vector<double>{g})}, st, 0.01);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(p[0] == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("cosine schedule") {
  TrainConfig cfg;
  cfg.lr_max = 1e-3;
  cfg.lr_min = 1e-5;
  CHECK(cosine_lr(0, 100, cfg) == doctest::Approx(1e-3));
  CHECK(cosine_lr(50, 100, cfg) == doctest::Approx(0.5 * (1e-3 + 1e-5)));
  CHECK(cosine_lr(100, 100, cfg) == doctest::Approx(1e-3));  // start of the next cycle
  CHECK(cosine_lr(99, 100, cfg) > 1e-5);
  CHECK(cosine_lr(99, 100, cfg) < 1.1e-5);
  for (std::size_t s = 1; s < 100; ++s) CHECK(cosine_lr(s, 100, cfg) <= cosine_lr(s - 1, 100, cfg));

  cfg.cycles = 4;
  for (std::size_t s = 0; s < 25; ++s) {
    CHECK(cosine_lr(s, 100, cfg) == doctest::Approx(cosine_lr(s + 25, 100, cfg)));
    CHECK(cosine_lr(s, 100, cfg) == doctest::Approx(cosine_lr(s + 75, 100, cfg)));
  }
  cfg.lr_min.reset();
  CHECK(cfg.min_lr() == doctest::Approx(1e-5));
}

TEST_CASE("train config validation and json") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    TrainConfig t;
    mutate(t);
    CHECK_THROWS_AS(t.validate(), Error);
  };
  bad([](TrainConfig& t) { t.lr_max = 0; });
  bad([](TrainConfig& t) { t.lr_min = 1.0; });
  bad([](TrainConfig& t) { t.lr_min = -1.0; });
  bad([](TrainConfig& t) { t.batch = 0; });
  bad([](TrainConfig& t) { t.cycles = 0; });
  bad([](TrainConfig& t) { t.fraction = 0; });
  bad([](TrainConfig& t) { t.fraction = 1.5; });
  bad([](TrainConfig& t) { t.loss_epsilon = 0; });
  bad([](TrainConfig& t) { t.clip_norm = -1; });

  c.epochs = 7;
  c.seed = 42;
  c.fraction = 0.25;
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  CHECK(back.epochs == 7);
  CHECK(back.seed == 42);
  CHECK(back.fraction == 0.25);
  CHECK(back.min_lr() == doctest::Approx(c.min_lr()));
  for (const auto& k : TrainConfig::keys()) CHECK(c.to_json().contains(k));
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"epochs", "many"}}), Error);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json::array()), Error);
}

TEST_CASE("evaluate at initialization equals the input baseline") {
  const auto model = net::MoireNet<float>::build(tiny());
  const auto ps = pairs(3);
  const EvalReport r = evaluate(model, ps);
  CHECK(r.count == 3);
  CHECK(r.per_image.size() == 3);
  CHECK(r.model.psnr_db == doctest::Approx(r.input.psnr_db).epsilon(1e-6));
  CHECK(r.model.ssim == doctest::Approx(r.input.ssim).epsilon(1e-6));
  double sum = 0;
  for (const auto& m : r.per_image) sum += m.psnr_db;
  CHECK(r.model.psnr_db == doctest::Approx(sum / 3));
  CHECK_THROWS_AS(evaluate(model, std::vector<data::Pair>{}), Error);
  CHECK_THROWS_AS(evaluate(model, temp_path("no_such_dir")), Error);
}

TEST_CASE("training reduces the loss and keeps the best checkpoint") {
  auto model = net::MoireNet<float>::build(tiny());
  TrainConfig cfg;
  cfg.lr_max = 2e-3;
  cfg.epochs = 6;
  cfg.batch = 2;
  cfg.seed = 1;
  const std::string ckpt = temp_path("best.mnck");
  std::ostringstream log;
  const TrainReport r = train::train(model, pairs(4), cfg, ckpt, &log);

  CHECK(r.train_pairs == 4);
  CHECK(r.val_pairs == 4);
  CHECK(r.steps == 12);
  REQUIRE(r.epochs.size() == 6);
  CHECK(r.epochs.back().loss < r.epochs.front().loss);
  CHECK(r.best.psnr_db >= r.input.psnr_db);
  CHECK(log.str().find("epoch 6/6") != std::string::npos);

  const auto loaded = net::load_checkpoint(ckpt);
  const EvalReport re = evaluate(loaded, pairs(4));
  CHECK(re.model.psnr_db == doctest::Approx(r.best.psnr_db).epsilon(1e-9));

  const nlohmann::json j = r.to_json();
  CHECK(j.at("epochs").size() == 6);
  CHECK(j.at("config").at("widths") == nlohmann::json{8, 16, 16});
  CHECK(j.at("config").at("epochs") == 6);
  std::filesystem::remove(ckpt);
}

TEST_CASE("training is deterministic for a fixed seed") {
  TrainConfig cfg;
  cfg.lr_max = 1e-3;
  cfg.epochs = 2;
  cfg.seed = 9;
  const auto ps = pairs(11);
  const std::string a = temp_path("det_a.mnck"), b = temp_path("det_b.mnck");
  auto m1 = net::MoireNet<float>::build(tiny());
  auto m2 = net::MoireNet<float>::build(tiny());
  const TrainReport r1 = train::train(m1, ps, cfg, a);
  const TrainReport r2 = train::train(m2, ps, cfg, b);
  CHECK(r1.to_json() == r2.to_json());
  CHECK(file_bytes(a) == file_bytes(b));
  // 11 pairs: one held out, 10 for training.
  CHECK(r1.val_pairs == 1);
  CHECK(r1.train_pairs == 10);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("fraction and zero epochs") {
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.fraction = 0.2;
  const std::string ckpt = temp_path("zero.mnck");
  auto model = net::MoireNet<float>::build(tiny());
  const TrainReport r = train::train(model, pairs(20), cfg, ckpt);
  CHECK(r.train_pairs == 4);  // 18 available after holding out 2
  CHECK(r.val_pairs == 2);
  CHECK(r.steps == 0);
  CHECK(r.best_epoch == 0);
  const auto loaded = net::load_checkpoint(ckpt);
  std::vector<std::vector<float>> a, b;
  model.for_each_param([&](const std::string&, const Tensor<float>& t) { a.push_back(t.values()); });
  loaded.for_each_param([&](const std::string&, const Tensor<float>& t) { b.push_back(t.values()); });
  CHECK(a == b);
  CHECK_THROWS_AS(train::train(model, std::vector<data::Pair>{}, cfg, ckpt), Error);
  std::filesystem::remove(ckpt);
}

TEST_CASE("epoch loss is non-increasing over five epochs for at least 9 of 10 seeds") {
  const auto ps = pairs(24, 32);
  int monotone = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    net::NetworkConfig nc = tiny();
    nc.seed = seed;
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = seed;
    auto model = net::MoireNet<float>::build(nc);
    const TrainReport r = train::train(model, ps, cfg, temp_path("mono.mnck"));
    bool ok = true;
    for (std::size_t e = 1; e < r.epochs.size(); ++e) ok = ok && r.epochs[e].loss <= r.epochs[e - 1].loss;
    monotone += ok;
    if (!ok) MESSAGE("seed " << seed << ": epoch loss increased");
  }
  CHECK(monotone >= 9);
  std::filesystem::remove(temp_path("mono.mnck"));
}
