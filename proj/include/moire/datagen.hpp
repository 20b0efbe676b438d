#pragma once

// Synthetic (clean, moire) pairs and 8-bit PNG I/O.
//
// Images are Tensor<float> of shape (1, 3, h, w) with values in [0, 1].

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "moire/tensor.hpp"

namespace moire::data {

using Image = Tensor<float>;

enum class SynthMode { Sinus, Screen };

const char* mode_name(SynthMode m) noexcept;
// Throws BadConfig on unknown names.
SynthMode parse_mode(const std::string& name);

struct SynthConfig {
  std::size_t size = 64;
  SynthMode mode = SynthMode::Sinus;
  double amplitude = 0.3;
  double f1 = 0.45;  // cycles/px
  double f2 = 0.40;
  std::uint64_t seed = 0;
  // Sinus mode: fixes both carrier orientations to this angle instead of
  // drawing them from the seed.
  std::optional<double> angle_deg;

  // Throws BadConfig.
  void validate() const;
};

// Procedural clean image: smooth gradient, soft-edged rectangles and a
// texture band-limited below 0.2 cycles/px.
Image synth_base(std::uint64_t seed, std::size_t size);

struct SynthPair {
  Image clean;
  Image moire;
  double clamped_fraction = 0.0;  // share of moire pixels with a channel clipped to [0, 1]
};

// Sinus: clean + A sin(2 pi f1 u1 + phi1 + o_c) sin(2 pi f2 u2 + phi2), with
// u = x cos(theta) + y sin(theta) and per-channel offsets o = {0, 0.7, 1.4}.
// Screen: the clean image shown on an RGB stripe panel, captured by a camera
// whose lattice is rotated by 1-5 degrees, through a Bayer mosaic and a
// bilinear demosaic; the result is blended in with weight A.
SynthPair synthesize_pair(const Image& base, const SynthConfig& cfg);

// Writes clean/NNNNN.png, moire/NNNNN.png and manifest.json. Pair i uses the
// base seed derived from (cfg.seed, i). Throws IoError.
void generate_dataset(const std::string& dir, std::size_t count, const SynthConfig& cfg);
std::uint64_t pair_seed(std::uint64_t seed, std::size_t index) noexcept;

struct Pair {
  std::string name;
  Image clean;
  Image moire;
};

// Pairs sorted by file name. Throws IoError or EmptyDataset.
std::vector<Pair> load_dataset(const std::string& dir);

// 8-bit RGB or RGBA (alpha dropped). Throws IoError, UnsupportedPng.
Image load_png(const std::string& path);
// Values are clamped to [0, 1] and rounded half away from zero.
void save_png(const Image& img, const std::string& path);
std::vector<std::uint8_t> encode_png(const Image& img);
std::vector<std::uint8_t> quantize(const Image& img);

}  // namespace moire::data
