// Acceptance run: one PASS/FAIL line per criterion A1-A10.
//
//   acceptance [--only A3] [--work DIR]
//
// Exits 0 when every selected criterion passes.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include "moire/cli.hpp"
#include "moire/gradcheck.hpp"
#include "moire/wavelet.hpp"
#include "support/oracles.hpp"

using namespace moire;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kA1ReconTol = 1e-5;
constexpr double kA1EnergyTol = 1e-4;
constexpr double kA1Seconds = 5.0;
constexpr double kA2Tol = 1e-4;
constexpr double kA2Seconds = 10.0;
constexpr double kA3GainDb = 3.0;
constexpr double kA3Seconds = 45 * 60.0;
constexpr double kA6Seconds = 10 * 60.0;
constexpr double kA9PsnrTol = 1e-3;
constexpr double kA9SsimSelfTol = 1e-9;
constexpr double kA9SsimConstTol = 1e-3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int cli_run(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o;
  const int code = cli::dispatch(args, o, std::cerr);
  if (out) *out = o.str();
  return code;
}

// ---- A1 ------------------------------------------------------------------

Outcome a1(const fs::path&) {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst_recon = 0.0, worst_energy = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Shape s{1 + rng.below(2), 1 + rng.below(8), 2 * (1 + rng.below(8)), 2 * (1 + rng.below(8))};
    const auto x = rng.uniform_tensor<float>(s, -1, 1);
    const auto z = wavelet::dwt2(x);
    worst_recon = std::max(worst_recon, oracle::max_abs(wavelet::iwt2(z), x));
    const double ex = oracle::inner(x, x);
    const double ez = oracle::inner(z.ll, z.ll) + oracle::inner(z.lh, z.lh) + oracle::inner(z.hl, z.hl) +
                      oracle::inner(z.hh, z.hh);
    worst_energy = std::max(worst_energy, std::abs(ez - ex) / ex);
  }
  const double secs = seconds_since(t0);
  return {worst_recon <= kA1ReconTol && worst_energy <= kA1EnergyTol && secs < kA1Seconds,
          "max recon error " + fmt(worst_recon) + ", max energy rel error " + fmt(worst_energy) + ", " + fmt(secs) +
              " s"};
}

// ---- A2 ------------------------------------------------------------------

// Each branch evaluated in its pixel-difference form, zero padding.
double branch_response(const Tensor<double>& x, std::size_t n, std::size_t ci, long y, long xx, const double* w,
                       int branch) {
  static const double v[9] = {3 / 16.0, 10 / 16.0, 3 / 16.0, 0, 0, 0, -3 / 16.0, -10 / 16.0, -3 / 16.0};
  static const double h[9] = {3 / 16.0, 0, -3 / 16.0, 10 / 16.0, 0, -10 / 16.0, 3 / 16.0, 0, -3 / 16.0};
  static const int ring[8] = {0, 1, 2, 5, 8, 7, 6, 3};
  auto px = [&](int t) {
    const long yy = y + t / 3 - 1, xc = xx + t % 3 - 1;
    if (yy < 0 || xc < 0 || yy >= long(x.h()) || xc >= long(x.w())) return 0.0;
    return x(n, ci, std::size_t(yy), std::size_t(xc));
  };
  double acc = 0.0;
  switch (branch) {
    case 0:
      for (int t = 0; t < 9; ++t) acc += w[t] * px(t);
      break;
    case 1:
      for (int t = 0; t < 9; ++t) acc += w[t] * (px(t) - px(4));
      break;
    case 2:
      for (int i = 0; i < 8; ++i) acc += w[ring[i]] * (px(ring[i]) - px(ring[(i + 1) % 8]));
      break;
    case 3:
      for (int t = 0; t < 9; ++t) acc += w[t] * h[t] * px(t);
      break;
    case 4:
      for (int t = 0; t < 9; ++t) acc += w[t] * v[t] * px(t);
      break;
  }
  return acc;
}

Outcome a2(const fs::path&) {
  const auto t0 = Clock::now();
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t cin = 1 + rng.below(4), cout = 1 + rng.below(4);
    const auto p = oracle::random_dac<float>(rng, cin, cout);
    const auto x = rng.uniform_tensor<float>(Shape{1 + rng.below(2), cin, 3 + rng.below(8), 3 + rng.below(8)}, -1, 1);
    const Tensor<float> fused = dirconv::dac_forward(x, p);
    Tensor<double> xd(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) xd[i] = x[i];
    for (std::size_t n = 0; n < x.n(); ++n)
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t y = 0; y < x.h(); ++y)
          for (std::size_t c = 0; c < x.w(); ++c) {
            double sum = 0.0;
            for (int k = 0; k < 5; ++k) {
              double branch = p.biases[k][o];
              for (std::size_t i = 0; i < cin; ++i) {
                double w[9];
                for (int t = 0; t < 9; ++t) w[t] = p.weights[k](o, i, t / 3, t % 3);
                branch += branch_response(xd, n, i, long(y), long(c), w, k);
              }
              sum += p.alpha[k] * branch;
            }
            worst = std::max(worst, std::abs(sum - fused(n, o, y, c)));
          }
  }
  const double secs = seconds_since(t0);
  return {worst <= kA2Tol && secs < kA2Seconds, "max abs error " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// ---- A3 / A8 shared dataset ----------------------------------------------

fs::path a3_dataset(const fs::path& work) {
  const fs::path dir = work / "a3_data";
  if (!fs::exists(dir / "manifest.json")) {
    data::SynthConfig cfg;
    cfg.size = 64;
    cfg.mode = data::SynthMode::Sinus;
    cfg.amplitude = 0.3;
    cfg.seed = 42;
    data::generate_dataset(dir.string(), 500, cfg);
  }
  return dir;
}

Outcome a3(const fs::path& work) {
  const auto pairs = data::load_dataset(a3_dataset(work).string());
  const auto t0 = Clock::now();
  auto model = net::MoireNet<float>::build(net::NetworkConfig{});
  train::TrainConfig cfg;
  cfg.epochs = 30;
  const auto report = train::train(model, pairs, cfg, (work / "a3.mnck").string(), &std::cerr);
  const double secs = seconds_since(t0);
  const auto& last = report.epochs.back();
  const double gain = last.val_psnr - report.input.psnr_db;
  return {gain >= kA3GainDb && last.val_ssim > report.input.ssim && secs < kA3Seconds,
          "held-out PSNR " + fmt(last.val_psnr, 4) + " dB vs input " + fmt(report.input.psnr_db, 4) + " dB (gain " +
              fmt(gain) + " dB), SSIM " + fmt(last.val_ssim, 4) + " vs " + fmt(report.input.ssim, 4) + ", " +
              fmt(secs / 60, 3) + " min"};
}

// ---- A4 ------------------------------------------------------------------

Outcome a4(const fs::path& work) {
  Rng rng(404);
  const auto model = net::MoireNet<float>::build(net::NetworkConfig{});
  bool identical = true;
  for (const auto& s : {Shape{1, 3, 64, 64}, Shape{2, 3, 37, 50}, Shape{1, 3, 8, 8}, Shape{1, 3, 5, 9}}) {
    const auto x = rng.uniform_tensor<float>(s, -2, 2);
    identical = identical && bitwise_equal(model.forward(x), x);
  }
  const fs::path dir = work / "a4";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string ckpt = (dir / "untrained.mnck").string();
  net::save_checkpoint(model, ckpt);
  data::save_png(rng.uniform_tensor<float>(Shape{1, 3, 45, 67}, 0, 1), (dir / "in.png").string());
  const int code = cli_run({"infer", "--ckpt", ckpt, "--input", (dir / "in.png").string(), "--output",
                            (dir / "out.png").string()});
  const bool same_png = code == 0 && bytes(dir / "in.png") == bytes(dir / "out.png");
  return {identical && same_png, std::string("forward identity ") + (identical ? "bitwise" : "broken") +
                                     ", infer PNG " + (same_png ? "byte-identical" : "differs")};
}

// ---- A5 ------------------------------------------------------------------

Outcome a5(const fs::path&) {
  Rng rng(505);
  int exact = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = 2 * (1 + rng.below(8));
    auto p = blocks::make_fsas<float>(c, 2, rng);
    for (auto* conv : {&p.spatial, &p.pix1, &p.pix2})
      for (auto* t : {&conv->weight, &conv->bias})
        for (auto& v : t->data()) v = static_cast<float>(rng.uniform(-1, 1));
    const auto x = rng.uniform_tensor<float>(Shape{1 + rng.below(2), c, 2 + rng.below(20), 2 + rng.below(20)}, -3, 3);
    if (p.a[0] == 0.0f && p.b[0] == 1.0f && bitwise_equal(blocks::fsas_forward(x, p), x)) ++exact;
  }
  return {exact == 20, std::to_string(exact) + "/20 inputs returned bitwise"};
}

// ---- A6 ------------------------------------------------------------------

Outcome a6(const fs::path&) {
  const auto t0 = Clock::now();
  std::string out;
  const int code = cli_run({"gradcheck", "--f64"}, &out);
  const double secs = seconds_since(t0);
  std::istringstream in(out);
  std::size_t lines = 0;
  double worst_op = 0.0, network = -1.0;
  for (std::string name, err, lt, thr, verdict; in >> name >> err >> lt >> thr >> verdict; ++lines) {
    if (name == "network") network = std::stod(err);
    else worst_op = std::max(worst_op, std::stod(err));
  }
  const bool pass = code == 0 && lines == gradcheck::names().size() && worst_op < 1e-3 && network >= 0 &&
                    network < 1e-2 && secs < kA6Seconds;
  return {pass, std::to_string(lines) + " checks, worst op " + fmt(worst_op) + ", network " + fmt(network) + ", " +
                    fmt(secs) + " s"};
}

// ---- A7 ------------------------------------------------------------------

Outcome a7(const fs::path& work) {
  const fs::path dir = work / "a7";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string data = (dir / "data").string();
  if (cli_run({"synth", "--out", data, "--count", "12", "--size", "32", "--seed", "7"}) != 0) {
    return {false, "synth failed"};
  }
  std::vector<std::string> outs(2);
  for (int k = 0; k < 2; ++k) {
    const std::string ck = (dir / ("run" + std::to_string(k) + ".mnck")).string();
    if (cli_run({"train", "--data", data, "--out", ck, "--epochs", "2", "--seed", "3"}, &outs[k]) != 0) {
      return {false, "train failed"};
    }
  }
  const bool ckpt = bytes(dir / "run0.mnck") == bytes(dir / "run1.mnck");
  const bool report = bytes(dir / "run0.mnck.json") == bytes(dir / "run1.mnck.json") && outs[0] == outs[1];
  return {ckpt && report, std::string("checkpoints ") + (ckpt ? "identical" : "differ") + ", reports " +
                              (report ? "identical" : "differ") + " (" +
                              std::to_string(fs::file_size(dir / "run0.mnck")) + " bytes)"};
}

// ---- A8 ------------------------------------------------------------------

Outcome a8(const fs::path& work) {
  const auto pairs = data::load_dataset(a3_dataset(work).string());
  struct Variant {
    const char* name;
    bool dac, dru, fsas_fam;
  };
  const Variant variants[] = {{"FSE", false, false, true},
                              {"FSE+DAC", true, false, true},
                              {"FSE+DAC+DRU", true, true, true},
                              {"no FSAS/FAM", true, true, false}};
  std::map<std::string, double> mean;
  for (const auto& v : variants) {
    double sum = 0.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      net::NetworkConfig nc;
      nc.dac_enabled = v.dac;
      nc.dru_enabled = v.dru;
      nc.fsas_enabled = nc.fam_enabled = v.fsas_fam;
      nc.seed = seed;
      train::TrainConfig tc;
      tc.epochs = 15;
      tc.seed = seed;
      tc.fraction = 0.5;
      auto model = net::MoireNet<float>::build(nc);
      std::cerr << "A8 " << v.name << " seed " << seed << "\n";
      const auto r = train::train(model, pairs, tc, (work / "a8.mnck").string(), &std::cerr);
      sum += r.epochs.back().val_psnr;
    }
    mean[v.name] = sum / 3.0;
  }
  const bool order = mean["FSE"] < mean["FSE+DAC"] && mean["FSE+DAC"] < mean["FSE+DAC+DRU"];
  const bool attn = mean["FSE+DAC+DRU"] > mean["no FSAS/FAM"];
  std::string detail;
  for (const auto& v : variants) detail += std::string(v.name) + " " + fmt(mean[v.name], 4) + " dB, ";
  detail += std::string("ordering ") + (order ? "holds" : "violated") + ", FSAS+FAM " + (attn ? "helps" : "does not help");
  return {order && attn, detail};
}

// ---- A9 ------------------------------------------------------------------

Outcome a9(const fs::path&) {
  auto constant = [](float v) { return Tensor<float>(Shape{1, 3, 32, 32}, v); };
  Rng rng(909);
  const auto x = rng.uniform_tensor<float>(Shape{2, 3, 40, 36}, 0, 1);
  const double p_half = metrics::psnr(constant(0.0f), constant(0.5f));
  const double p_full = metrics::psnr(constant(0.0f), constant(1.0f));
  const double p_same = metrics::psnr(x, x);
  const double s_self = metrics::ssim(x, x);
  const double s_const = metrics::ssim(constant(0.5f), constant(1.0f));
  const bool pass = std::abs(p_half - 6.0206) <= kA9PsnrTol && std::abs(p_full) <= kA9PsnrTol &&
                    std::isinf(p_same) && p_same > 0 && std::abs(s_self - 1.0) <= kA9SsimSelfTol &&
                    std::abs(s_const - 0.8001) <= kA9SsimConstTol;
  return {pass, "psnr " + fmt(p_half, 6) + " / " + fmt(p_full, 6) + " / " + metrics::format_db(p_same) +
                    " dB, ssim self " + fmt(s_self, 12) + ", constant " + fmt(s_const, 6)};
}

// ---- A10 -----------------------------------------------------------------

Outcome a10(const fs::path&) {
  struct Case {
    std::uint64_t seed;
    double f1, f2, angle;
  };
  const Case cases[] = {{1, 0.45, 0.40, 0}, {2, 0.45, 0.40, 90}, {3, 0.45, 0.40, 0}, {4, 0.45, 0.40, 90},
                        {5, 0.45, 0.40, 0}};
  const std::size_t n = 64;
  int hits = 0;
  std::string detail;
  for (const auto& c : cases) {
    data::SynthConfig cfg;
    cfg.size = n;
    cfg.seed = c.seed;
    cfg.f1 = c.f1;
    cfg.f2 = c.f2;
    cfg.angle_deg = c.angle;
    const auto pair = data::synthesize_pair(data::synth_base(c.seed, n), cfg);
    double worst_offset = 0.0;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      auto plane = oracle::channel_plane(pair.moire, ch);
      const auto clean = oracle::channel_plane(pair.clean, ch);
      for (std::size_t i = 0; i < plane.size(); ++i) plane[i] -= clean[i];
      const auto s = oracle::power_spectrum(plane, n, n, false);
      std::size_t by = 0, bx = 1;
      for (std::size_t ky = 0; ky < n; ++ky)
        for (std::size_t kx = 0; kx < n; ++kx)
          if ((ky || kx) && s.at(ky, kx) > s.at(by, bx)) by = ky, bx = kx;
      worst_offset = std::max(worst_offset, std::abs(s.radius(by, bx) - std::abs(c.f1 - c.f2)) * double(n));
    }
    if (worst_offset <= 1.0) ++hits;
    detail += fmt(worst_offset, 2) + " ";
  }
  return {hits == 5, std::to_string(hits) + "/5 configs within one bin (offsets in bins: " + detail + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria A1-A10"};
  std::string only;
  std::string work = (fs::temp_directory_path() / "moire_acceptance").string();
  app.add_option("--only", only, "Run a single criterion, e.g. A3");
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome(const fs::path&)>>> criteria{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},
      {"A6", a6}, {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}};
  if (!only.empty() && std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == only; })) {
    std::cerr << "unknown criterion " << only << "\n";
    return 1;
  }
  fs::create_directories(work);
  bool all = true;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && id != only) continue;
    Outcome o;
    try {
      o = fn(work);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
