#include "moire/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "moire/datagen.hpp"
#include "moire/gradcheck.hpp"

namespace moire::cli {

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, path + ": " + e.what());
  }
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
}

std::string metric_line(const metrics::MetricReport& m) {
  std::ostringstream s;
  s << "PSNR: " << metrics::format_db(m.psnr_db) << " dB  SSIM: " << std::fixed << std::setprecision(4) << m.ssim;
  return s.str();
}

// Flag values; unset ones leave the configuration file values alone.
struct TrainFlags {
  std::string data, out, config, report;
  std::optional<std::size_t> epochs, batch, cycles;
  std::optional<double> lr, lr_min, fraction, clip;
  std::optional<std::uint64_t> seed;
};

struct SynthFlags {
  std::string out;
  std::size_t count = 100;
  std::string mode = "sinus";
  data::SynthConfig cfg;
  std::optional<double> angle;
};

int run_synth(const SynthFlags& f, std::ostream& out, std::ostream&) {
  data::SynthConfig cfg = f.cfg;
  cfg.mode = data::parse_mode(f.mode);
  cfg.angle_deg = f.angle;
  cfg.validate();
  data::generate_dataset(f.out, f.count, cfg);
  out << "pairs: " << f.count << "\n";
  return kOk;
}

int run_train(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig rc = f.config.empty() ? RunConfig{} : parse_run_config(read_json(f.config));
  auto& t = rc.training;
  if (f.epochs) t.epochs = *f.epochs;
  if (f.batch) t.batch = *f.batch;
  if (f.cycles) t.cycles = *f.cycles;
  if (f.lr) t.lr_max = *f.lr;
  if (f.lr_min) t.lr_min = *f.lr_min;
  if (f.fraction) t.fraction = *f.fraction;
  if (f.clip) t.clip_norm = *f.clip;
  if (f.seed) t.seed = rc.network.seed = *f.seed;
  rc.network.validate();
  t.validate();

  auto model = net::MoireNet<float>::build(rc.network);
  const train::TrainReport report = train::train(model, f.data, t, f.out, &err);
  write_json(report.to_json(), f.report.empty() ? f.out + ".json" : f.report);
  out << "best_epoch: " << report.best_epoch << "\n";
  out << metric_line(report.best) << "\n";
  out << "Input " << metric_line(report.input) << "\n";
  return kOk;
}

int run_infer(const std::string& ckpt, const std::string& input, const std::string& output, std::ostream&) {
  const auto model = net::load_checkpoint(ckpt);
  const data::Image img = data::load_png(input);
  data::save_png(model.forward(img), output);
  return kOk;
}

int run_eval(const std::string& ckpt, const std::string& dir, std::ostream& out) {
  const auto model = net::load_checkpoint(ckpt);
  const train::EvalReport r = train::evaluate(model, dir);
  out << metric_line(r.model) << "\n";
  out << "Input " << metric_line(r.input) << "\n";
  return kOk;
}

int run_params(const std::string& config, std::ostream& out) {
  const RunConfig rc = config.empty() ? RunConfig{} : parse_run_config(read_json(config));
  const auto model = net::MoireNet<float>::build(rc.network);
  out << model.count_params() << "\n";
  for (const auto& [name, count] : model.param_breakdown()) out << name << " " << count << "\n";
  return kOk;
}

int run_gradcheck(const std::string& op, bool f64, std::ostream& out) {
  bool ok = true;
  for (const auto& name : op.empty() ? gradcheck::names() : std::vector<std::string>{op}) {
    const gradcheck::Result r = gradcheck::run(name, f64);
    out << std::left << std::setw(24) << r.name << " " << std::scientific << std::setprecision(3) << r.max_rel_error
        << " < " << r.threshold << " " << (r.passed() ? "ok" : "FAIL") << "\n"
        << std::flush;
    ok = ok && r.passed();
  }
  return ok ? kOk : kRuntime;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
  const auto& nk = net::NetworkConfig::keys();
  const auto& tk = train::TrainConfig::keys();
  for (const auto& [key, value] : j.items()) {
    if (std::find(nk.begin(), nk.end(), key) == nk.end() && std::find(tk.begin(), tk.end(), key) == tk.end()) {
      throw Error(ErrorCode::BadConfig, "unknown config key '" + key + "'");
    }
  }
  RunConfig rc;
  rc.network = net::NetworkConfig::from_json(j);
  rc.training = train::TrainConfig::from_json(j);
  rc.network.validate();
  rc.training.validate();
  return rc;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wavelet-domain image demoireing on the CPU", "moire"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "Generate synthetic (clean, moire) pairs");
  synth->add_option("--out", sf.out, "Output directory")->required();
  synth->add_option("--count", sf.count, "Number of pairs")->check(CLI::PositiveNumber);
  synth->add_option("--size", sf.cfg.size, "Image side in pixels");
  synth->add_option("--mode", sf.mode, "sinus or screen");
  synth->add_option("--amplitude", sf.cfg.amplitude, "Moire strength");
  synth->add_option("--f1", sf.cfg.f1, "First carrier (cycles/px)");
  synth->add_option("--f2", sf.cfg.f2, "Second carrier (cycles/px)");
  synth->add_option("--angle", sf.angle, "Fixed carrier orientation in degrees (sinus)");
  synth->add_option("--seed", sf.cfg.seed, "Random seed");

  TrainFlags tf;
  auto* trn = app.add_subcommand("train", "Train a network on a synthetic dataset");
  trn->add_option("--data", tf.data, "Dataset directory")->required();
  trn->add_option("--out", tf.out, "Checkpoint path for the best weights")->required();
  trn->add_option("--report", tf.report, "TrainReport JSON path (default: <out>.json)");
  trn->add_option("--config", tf.config, "JSON file with network and training keys");
  trn->add_option("--epochs", tf.epochs, "Epochs");
  trn->add_option("--batch", tf.batch, "Batch size");
  trn->add_option("--lr", tf.lr, "Peak learning rate");
  trn->add_option("--lr-min", tf.lr_min, "Floor learning rate (default lr/100)");
  trn->add_option("--cycles", tf.cycles, "Cosine annealing cycles");
  trn->add_option("--seed", tf.seed, "Seed for initialization and shuffling");
  trn->add_option("--fraction", tf.fraction, "Share of the training pairs used");
  trn->add_option("--clip", tf.clip, "Global gradient norm clip (0 disables)");

  std::string ckpt, input, output, data_dir, config, op;
  bool f64 = false;
  auto* infer = app.add_subcommand("infer", "Remove moire from one PNG");
  infer->add_option("--ckpt", ckpt, "Checkpoint")->required();
  infer->add_option("--input", input, "Input PNG")->required();
  infer->add_option("--output", output, "Output PNG")->required();

  auto* eval = app.add_subcommand("eval", "Mean PSNR/SSIM over a dataset");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--data", data_dir, "Dataset directory")->required();

  auto* params = app.add_subcommand("params", "Count trainable parameters");
  params->add_option("--config", config, "JSON file with network keys");

  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gc->add_option("--op", op, "Check only this op");
  gc->add_flag("--f64", f64, "Run in double precision");

  std::vector<std::string> argv_store{"moire"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run 'moire --help' for usage\n";
    return kUsage;
  }

  try {
    if (*synth) return run_synth(sf, out, err);
    if (*trn) return run_train(tf, out, err);
    if (*infer) return run_infer(ckpt, input, output, err);
    if (*eval) return run_eval(ckpt, data_dir, out);
    if (*params) return run_params(config, out);
    if (*gc) return run_gradcheck(op, f64, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::BadConfig ? kUsage : kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace moire::cli
