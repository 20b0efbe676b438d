#include "moire/datagen.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "moire/rng.hpp"

namespace moire::data {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::array<double, 3> kChannelPhase{0.0, 0.7, 1.4};

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Soft indicator of [lo, hi) with 6 px ramps centred on the edges.
double soft_box(double v, double lo, double hi) {
  constexpr double ramp = 6.0;
  return smoothstep((v - lo) / ramp + 0.5) * smoothstep((hi - v) / ramp + 0.5);
}

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Clamps to [0, 1], flagging the pixel when a value had to move.
float clamp01(double v, std::vector<bool>& flags, std::size_t pixel) {
  if (v < 0.0 || v > 1.0) flags[pixel] = true;
  return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

double flagged_share(const std::vector<bool>& flags) {
  return static_cast<double>(std::count(flags.begin(), flags.end(), true)) / static_cast<double>(flags.size());
}

void require_rgb(const Image& img, const char* what) {
  const Shape& s = img.shape();
  if (s.n != 1 || s.c != 3) throw Error(ErrorCode::ShapeMismatch, std::string(what) + " expects (1,3,h,w), got " + s.str());
}

SynthPair sinus_pair(const Image& base, const SynthConfig& cfg) {
  Rng rng(splitmix(cfg.seed ^ 0x51u));
  double theta = rng.uniform(0.0, kPi);
  double theta2 = theta + rng.uniform(-10.0, 10.0) * kPi / 180.0;
  const double phi1 = rng.uniform(0.0, 2 * kPi);
  const double phi2 = rng.uniform(0.0, 2 * kPi);
  if (cfg.angle_deg) theta = theta2 = *cfg.angle_deg * kPi / 180.0;

  const Shape& s = base.shape();
  SynthPair out{base, Image(s), 0.0};
  std::vector<bool> clamped(s.h * s.w, false);
  const float amp = static_cast<float>(cfg.amplitude);
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x) {
      const double u1 = static_cast<double>(x) * std::cos(theta) + static_cast<double>(y) * std::sin(theta);
      const double u2 = static_cast<double>(x) * std::cos(theta2) + static_cast<double>(y) * std::sin(theta2);
      const double carrier2 = std::sin(2 * kPi * cfg.f2 * u2 + phi2);
      for (std::size_t c = 0; c < 3; ++c) {
        const double pattern = std::sin(2 * kPi * cfg.f1 * u1 + phi1 + kChannelPhase[c]) * carrier2;
        const float v = base(0, c, y, x) + amp * static_cast<float>(pattern);
        out.moire(0, c, y, x) = clamp01(v, clamped, y * s.w + x);
      }
    }
  }
  out.clamped_fraction = flagged_share(clamped);
  return out;
}

// Bayer colour at camera pixel (y, x), RGGB.
std::size_t bayer_channel(std::size_t y, std::size_t x) {
  if (y % 2 == 0) return x % 2 == 0 ? 0 : 1;
  return x % 2 == 0 ? 1 : 2;
}

SynthPair screen_pair(const Image& base, const SynthConfig& cfg) {
  Rng rng(splitmix(cfg.seed ^ 0x5Cu));
  const double angle = rng.uniform(1.0, 5.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0) * kPi / 180.0;
  const double offset_u = rng.uniform();
  const double ca = std::cos(angle), sa = std::sin(angle);
  const Shape& s = base.shape();
  constexpr double stripes = 4.0;  // subpixel columns per panel pixel
  constexpr double aperture = 0.5;  // camera pixel opening, in pixel pitches
  constexpr int samples = 8;

  // Each camera pixel integrates the panel over its opening and keeps only its
  // Bayer colour. Panel pixels have the pitch of the clean image; of their 4
  // subpixel columns, 0..2 emit R, G, B and 3 is a gap.
  std::vector<double> mosaic(s.h * s.w);
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x) {
      const std::size_t ch = bayer_channel(y, x);
      int lit = 0;
      for (int i = 0; i < samples; ++i) {
        for (int j = 0; j < samples; ++j) {
          const double py = static_cast<double>(y) + 0.5 + aperture * ((i + 0.5) / samples - 0.5);
          const double px = static_cast<double>(x) + 0.5 + aperture * ((j + 0.5) / samples - 0.5);
          // Only the subpixel mask is rotated; content stays on the camera grid.
          const double u = ca * px + sa * py + offset_u;
          if (static_cast<std::size_t>((u - std::floor(u)) * stripes) == ch) ++lit;
        }
      }
      // Scaled so a uniform panel reads its own value on average.
      mosaic[y * s.w + x] = base(0, ch, y, x) * stripes * lit / (samples * samples);
    }
  }

  // Bilinear demosaic: normalized convolution of each sparse colour plane.
  static constexpr double kRb[3][3] = {{1, 2, 1}, {2, 4, 2}, {1, 2, 1}};
  static constexpr double kG[3][3] = {{0, 1, 0}, {1, 4, 1}, {0, 1, 0}};
  SynthPair out{base, Image(s), 0.0};
  std::vector<bool> clamped(s.h * s.w, false);
  const double a = cfg.amplitude;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& k = c == 1 ? kG : kRb;
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        double num = 0.0, den = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
            const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(s.h) || xx >= static_cast<std::ptrdiff_t>(s.w)) {
              continue;
            }
            const auto uy = static_cast<std::size_t>(yy), ux = static_cast<std::size_t>(xx);
            if (bayer_channel(uy, ux) != c) continue;
            num += k[dy + 1][dx + 1] * mosaic[uy * s.w + ux];
            den += k[dy + 1][dx + 1];
          }
        }
        const double captured = num / den;
        const double clean = base(0, c, y, x);
        out.moire(0, c, y, x) = clamp01(a == 0.0 ? clean : clean + a * (captured - clean), clamped, y * s.w + x);
      }
    }
  }
  out.clamped_fraction = flagged_share(clamped);
  return out;
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string pair_name(std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return digits + ".png";
}

}  // namespace

const char* mode_name(SynthMode m) noexcept { return m == SynthMode::Sinus ? "sinus" : "screen"; }

SynthMode parse_mode(const std::string& name) {
  if (name == "sinus") return SynthMode::Sinus;
  if (name == "screen") return SynthMode::Screen;
  throw Error(ErrorCode::BadConfig, "unknown synthesis mode '" + name + "' (sinus|screen)");
}

void SynthConfig::validate() const {
  if (size < 16) throw Error(ErrorCode::BadConfig, "size must be at least 16, got " + std::to_string(size));
  if (!(amplitude >= 0.0 && amplitude <= 1.0)) throw Error(ErrorCode::BadConfig, "amplitude must lie in [0, 1]");
  if (!(f1 > 0.0 && f1 < 0.5) || !(f2 > 0.0 && f2 < 0.5)) {
    throw Error(ErrorCode::BadConfig, "carrier frequencies must lie in (0, 0.5) cycles/px");
  }
  if (angle_deg && !std::isfinite(*angle_deg)) throw Error(ErrorCode::BadConfig, "angle must be finite");
}

Image synth_base(std::uint64_t seed, std::size_t size) {
  if (size < 16) throw Error(ErrorCode::BadConfig, "size must be at least 16, got " + std::to_string(size));
  Rng rng(seed);
  const double n = static_cast<double>(size);

  std::array<double, 3> color0{};
  for (auto& c : color0) c = rng.uniform(0.4, 0.6);
  const double psi = rng.uniform(0.0, 2 * kPi);
  const double slope = rng.uniform(0.05, 0.15);

  struct Rect {
    double y0, y1, x0, x1, alpha;
    std::array<double, 3> color;
  };
  std::vector<Rect> rects(3 + rng.below(4));
  for (auto& r : rects) {
    r.y0 = rng.uniform(-0.1, 0.8) * n;
    r.x0 = rng.uniform(-0.1, 0.8) * n;
    r.y1 = r.y0 + rng.uniform(0.15, 0.5) * n;
    r.x1 = r.x0 + rng.uniform(0.15, 0.5) * n;
    r.alpha = rng.uniform(0.4, 0.9);
    for (auto& c : r.color) c = rng.uniform(0.32, 0.68);
  }

  struct Wave {
    double fy, fx, phase, amp;
    std::array<double, 3> tint;
  };
  std::array<Wave, 3> waves{};
  for (auto& w : waves) {
    const double f = rng.uniform(0.02, 0.2);
    const double dir = rng.uniform(0.0, 2 * kPi);
    w.fy = f * std::sin(dir);
    w.fx = f * std::cos(dir);
    w.phase = rng.uniform(0.0, 2 * kPi);
    w.amp = rng.uniform(0.005, 0.02);
    for (auto& t : w.tint) t = rng.uniform(0.5, 1.0);
  }

  Image img(Shape{1, 3, size, size});
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double yy = static_cast<double>(y), xx = static_cast<double>(x);
      const double ramp = slope * (std::cos(psi) * (xx / n - 0.5) + std::sin(psi) * (yy / n - 0.5));
      std::array<double, 3> v{};
      for (std::size_t c = 0; c < 3; ++c) v[c] = color0[c] + ramp;
      for (const auto& r : rects) {
        const double cover = r.alpha * soft_box(yy, r.y0, r.y1) * soft_box(xx, r.x0, r.x1);
        for (std::size_t c = 0; c < 3; ++c) v[c] += cover * (r.color[c] - v[c]);
      }
      for (const auto& w : waves) {
        const double t = w.amp * std::sin(2 * kPi * (w.fy * yy + w.fx * xx) + w.phase);
        for (std::size_t c = 0; c < 3; ++c) v[c] += w.tint[c] * t;
      }
      for (std::size_t c = 0; c < 3; ++c) img(0, c, y, x) = static_cast<float>(std::clamp(v[c], 0.0, 1.0));
    }
  }
  return img;
}

SynthPair synthesize_pair(const Image& base, const SynthConfig& cfg) {
  cfg.validate();
  require_rgb(base, "synthesize_pair");
  if (base.h() < 16 || base.w() < 16) throw Error(ErrorCode::BadConfig, "base image smaller than 16 px");
  return cfg.mode == SynthMode::Sinus ? sinus_pair(base, cfg) : screen_pair(base, cfg);
}

std::uint64_t pair_seed(std::uint64_t seed, std::size_t index) noexcept {
  return splitmix(seed ^ splitmix(static_cast<std::uint64_t>(index)));
}

void generate_dataset(const std::string& dir, std::size_t count, const SynthConfig& cfg) {
  cfg.validate();
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "clean", ec);
  if (!ec) fs::create_directories(root / "moire", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());

  std::size_t warned = 0;
  for (std::size_t i = 0; i < count; ++i) {
    SynthConfig pc = cfg;
    pc.seed = pair_seed(cfg.seed, i);
    const SynthPair p = synthesize_pair(synth_base(pc.seed, cfg.size), pc);
    if (p.clamped_fraction > 0.02) ++warned;
    write_file(root / "clean" / pair_name(i), encode_png(p.clean));
    write_file(root / "moire" / pair_name(i), encode_png(p.moire));
  }
  if (warned > 0) {
    std::cerr << "warning: clamping touched more than 2% of the pixels in " << warned << " of " << count
              << " moire images\n";
  }

  nlohmann::json manifest{{"mode", mode_name(cfg.mode)}, {"amplitude", cfg.amplitude}, {"f1", cfg.f1},
                          {"f2", cfg.f2},                {"size", cfg.size},           {"seed", cfg.seed},
                          {"count", count}};
  if (cfg.angle_deg) manifest["angle_deg"] = *cfg.angle_deg;
  const std::string text = manifest.dump(2) + "\n";
  write_file(root / "manifest.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<Pair> load_dataset(const std::string& dir) {
  const fs::path root(dir);
  const fs::path clean_dir = root / "clean", moire_dir = root / "moire";
  std::error_code ec;
  if (!fs::is_directory(clean_dir, ec) || !fs::is_directory(moire_dir, ec)) {
    throw Error(ErrorCode::IoError, "dataset " + dir + " lacks clean/ and moire/ directories");
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(clean_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") names.push_back(entry.path().filename());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw Error(ErrorCode::EmptyDataset, "no pairs in " + dir);
  std::vector<Pair> pairs;
  pairs.reserve(names.size());
  for (const auto& name : names) {
    Pair p{name, load_png((clean_dir / name).string()), load_png((moire_dir / name).string())};
    if (p.clean.shape() != p.moire.shape()) throw Error(ErrorCode::ShapeMismatch, "pair " + name + " differs in size");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

// ---- PNG -----------------------------------------------------------------

Image load_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::IoError, "no such file " + path);
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::IoError, "cannot read PNG " + path + ": " + image.message);
  }
  const auto fmt = image.format;
  const char* reason = nullptr;
  if ((fmt & PNG_FORMAT_FLAG_COLORMAP) != 0) reason = "palette";
  if ((fmt & PNG_FORMAT_FLAG_LINEAR) != 0) reason = "16-bit";
  if ((fmt & PNG_FORMAT_FLAG_COLOR) == 0) reason = "grayscale";
  if (reason) {
    png_image_free(&image);
    throw Error(ErrorCode::UnsupportedPng, std::string(reason) + " PNG " + path);
  }
  const bool alpha = (fmt & PNG_FORMAT_FLAG_ALPHA) != 0;
  image.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  const std::size_t ch = alpha ? 4 : 3;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, "cannot decode PNG " + path + ": " + image.message);
  }
  const std::size_t h = image.height, w = image.width;
  Image img(Shape{1, 3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img(0, c, y, x) = static_cast<float>(buf[(y * w + x) * ch + c]) / 255.0f;
  return img;
}

std::vector<std::uint8_t> quantize(const Image& img) {
  require_rgb(img, "quantize");
  const std::size_t h = img.h(), w = img.w();
  std::vector<std::uint8_t> buf(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(img(0, c, y, x)), 0.0, 1.0);
        buf[(y * w + x) * 3 + c] = static_cast<std::uint8_t>(std::round(v * 255.0));
      }
  return buf;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  const std::vector<std::uint8_t> buf = quantize(img);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.w());
  image.height = static_cast<png_uint_32>(img.h());
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, buf.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("PNG encoding failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, buf.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("PNG encoding failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

void save_png(const Image& img, const std::string& path) { write_file(path, encode_png(img)); }

}  // namespace moire::data
