#pragma once

// Encoder/decoder demoireing network with residual output I + F(I).
//
//   shallow 3x3 conv (3 -> w0)
//   level i: stage (level 0 DFSE, others FSE) -> FAM(stage in, stage out)
//            -> stride-2 3x3 conv to w(i+1), except the last level
//   bottleneck: FSE -> FSAS
//   decoder into level i: 1x1 conv to 4*w(i) + pixel shuffle (i > 0) or a
//            k4 s2 p1 transposed conv (i = 0), then FAM(skip, up)
//   head 3x3 conv (w0 -> 3), zero-initialized
//
// Inputs are reflect-padded to a multiple of 2^(scales-1) and cropped back.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "moire/blocks.hpp"

namespace moire::net {

struct NetworkConfig {
  std::vector<std::size_t> widths{32, 64, 128};
  std::size_t scales = 3;
  bool dac_enabled = true;
  bool dru_enabled = true;
  bool fsas_enabled = true;
  bool fam_enabled = true;
  std::size_t groups = 4;
  std::uint64_t seed = 0;

  // Throws BadConfig.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; keys outside the config are ignored.
  static NetworkConfig from_json(const nlohmann::json& j);
  static const std::vector<std::string>& keys();

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

template <typename T>
class MoireNet {
 public:
  static MoireNet build(const NetworkConfig& cfg);

  const NetworkConfig& config() const noexcept { return cfg_; }

  // (n, 3, h, w) -> (n, 3, h, w). Throws NotRGB.
  ag::Var<T> forward(ag::Var<T> input) const;
  Tensor<T> forward(const Tensor<T>& input) const;

  // fn(name, tensor) over every trainable tensor in build order.
  template <typename F>
  void for_each_param(F&& fn);
  template <typename F>
  void for_each_param(F&& fn) const {
    const_cast<MoireNet*>(this)->for_each_param([&](const std::string& name, Tensor<T>& t) {
      fn(name, static_cast<const Tensor<T>&>(t));
    });
  }

  std::size_t count_params() const;
  // Parameter counts per block: "shallow", "enc0.stage", "dec1.fam", ...
  std::vector<std::pair<std::string, std::size_t>> param_breakdown() const;

 private:
  struct Level {
    std::variant<blocks::Dfse<T>, blocks::Fse<T>> stage;
    std::optional<blocks::Fam<T>> fam;
    std::optional<blocks::Conv<T>> down;
  };
  struct Up {
    blocks::Conv<T> conv;  // 1x1 before a pixel shuffle, or the transposed conv
    bool transposed = false;
    std::optional<blocks::Fam<T>> fam;
  };

  ag::Var<T> forward_padded(ag::Var<T> x) const;

  NetworkConfig cfg_;
  blocks::Conv<T> shallow_;
  std::vector<Level> levels_;
  blocks::Fse<T> bottleneck_;
  std::optional<blocks::Fsas<T>> fsas_;
  std::vector<Up> ups_;  // ups_[i] feeds level i, for i < scales - 1
  blocks::Conv<T> head_;
};

// Same architecture and values in another scalar type.
template <typename U, typename T>
MoireNet<U> convert(const MoireNet<T>& net);

// Checkpoint container: magic "MNCK", u32 version 1, u64 config length,
// canonical config JSON, then per parameter (u32 name length, name, u8 rank,
// u64 dims, f32 data), then a CRC-32 of everything after the magic. All
// integers little-endian. Weights are rank 4, every other tensor rank 1.
void save_checkpoint(const MoireNet<float>& net, const std::string& path);
std::vector<std::uint8_t> checkpoint_bytes(const MoireNet<float>& net);
// Throws IoError, BadMagic, CrcMismatch, VersionUnsupported, ConfigMismatch.
MoireNet<float> load_checkpoint(const std::string& path);
MoireNet<float> parse_checkpoint(const std::vector<std::uint8_t>& bytes);

// ---- implementation of the traversal ----------------------------------------

template <typename T>
template <typename F>
void MoireNet<T>::for_each_param(F&& fn) {
  blocks::visit(shallow_, "shallow", fn);
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    Level& lv = levels_[i];
    const std::string p = "enc" + std::to_string(i);
    std::visit([&](auto& stage) { blocks::visit(stage, p + ".stage", fn); }, lv.stage);
    if (lv.fam) blocks::visit(*lv.fam, p + ".fam", fn);
    if (lv.down) blocks::visit(*lv.down, p + ".down", fn);
  }
  blocks::visit(bottleneck_, "bottleneck.fse", fn);
  if (fsas_) blocks::visit(*fsas_, "bottleneck.fsas", fn);
  for (std::size_t k = ups_.size(); k-- > 0;) {
    Up& up = ups_[k];
    const std::string p = "dec" + std::to_string(k);
    blocks::visit(up.conv, p + ".up", fn);
    if (up.fam) blocks::visit(*up.fam, p + ".fam", fn);
  }
  blocks::visit(head_, "head", fn);
}

}  // namespace moire::net
