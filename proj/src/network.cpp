#include "moire/network.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace moire::net {

// ---- config --------------------------------------------------------------

void NetworkConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::BadConfig, msg); };
  if (scales < 1) bad("scales must be at least 1");
  if (widths.size() != scales) {
    bad("widths has " + std::to_string(widths.size()) + " entries but scales is " + std::to_string(scales));
  }
  if (groups < 1) bad("groups must be at least 1");
  for (std::size_t w : widths) {
    if (w == 0 || w % (2 * groups) != 0) {
      bad("width " + std::to_string(w) + " is not a positive multiple of 2*groups = " + std::to_string(2 * groups));
    }
  }
}

const std::vector<std::string>& NetworkConfig::keys() {
  static const std::vector<std::string> k{"widths",       "scales",      "dac_enabled", "dru_enabled",
                                          "fsas_enabled", "fam_enabled", "groups",      "seed"};
  return k;
}

nlohmann::json NetworkConfig::to_json() const {
  return nlohmann::json{{"widths", widths},         {"scales", scales},           {"dac_enabled", dac_enabled},
                        {"dru_enabled", dru_enabled}, {"fsas_enabled", fsas_enabled}, {"fam_enabled", fam_enabled},
                        {"groups", groups},         {"seed", seed}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "network config must be a JSON object");
  NetworkConfig c;
  try {
    if (j.contains("widths")) c.widths = j.at("widths").get<std::vector<std::size_t>>();
    if (j.contains("scales")) c.scales = j.at("scales").get<std::size_t>();
    if (j.contains("dac_enabled")) c.dac_enabled = j.at("dac_enabled").get<bool>();
    if (j.contains("dru_enabled")) c.dru_enabled = j.at("dru_enabled").get<bool>();
    if (j.contains("fsas_enabled")) c.fsas_enabled = j.at("fsas_enabled").get<bool>();
    if (j.contains("fam_enabled")) c.fam_enabled = j.at("fam_enabled").get<bool>();
    if (j.contains("groups")) c.groups = j.at("groups").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, e.what());
  }
  return c;
}

// ---- network -------------------------------------------------------------

template <typename T>
MoireNet<T> MoireNet<T>::build(const NetworkConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  MoireNet net;
  net.cfg_ = cfg;
  const auto& w = cfg.widths;

  net.shallow_ = blocks::make_conv<T>(3, w[0], 3, rng);
  for (std::size_t i = 0; i < cfg.scales; ++i) {
    Level lv{blocks::make_fse<T>(w[i], rng), std::nullopt, std::nullopt};
    if (i == 0) lv.stage = blocks::make_dfse<T>(w[0], w[0], cfg.dac_enabled, cfg.dru_enabled, rng);
    if (cfg.fam_enabled) lv.fam = blocks::make_fam<T>(w[i], cfg.groups, rng);
    if (i + 1 < cfg.scales) lv.down = blocks::make_conv<T>(w[i], w[i + 1], 3, rng, 2);
    net.levels_.push_back(std::move(lv));
  }
  net.bottleneck_ = blocks::make_fse<T>(w.back(), rng);
  if (cfg.fsas_enabled) net.fsas_ = blocks::make_fsas<T>(w.back(), cfg.groups, rng);

  net.ups_.resize(cfg.scales - 1);
  for (std::size_t k = cfg.scales - 1; k-- > 0;) {
    Up& up = net.ups_[k];
    if (k > 0) {
      up.conv = blocks::make_conv<T>(w[k + 1], 4 * w[k], 1, rng);
    } else {
      // Transposed weights are (c_in, c_out, k, k): the layout of a conv from c_out to c_in.
      up.conv = blocks::make_conv<T>(w[0], w[1], 4, rng, 2, 1, 1);
      up.conv.bias = Tensor<T>(Shape{1, w[0], 1, 1});
      up.transposed = true;
    }
    if (cfg.fam_enabled) up.fam = blocks::make_fam<T>(w[k], cfg.groups, rng);
  }

  net.head_ = blocks::make_conv<T>(w[0], 3, 3, rng);
  std::fill(net.head_.weight.data().begin(), net.head_.weight.data().end(), T(0));
  return net;
}

template <typename T>
ag::Var<T> MoireNet<T>::forward_padded(ag::Var<T> x) const {
  ag::Var<T> f = blocks::apply(shallow_, x);
  std::vector<ag::Var<T>> skips;
  for (const Level& lv : levels_) {
    ag::Var<T> out = std::visit(
        [&](const auto& stage) {
          if constexpr (std::is_same_v<std::decay_t<decltype(stage)>, blocks::Dfse<T>>) {
            return blocks::dfse_forward(f, stage);
          } else {
            return blocks::fse_forward(f, stage);
          }
        },
        lv.stage);
    if (lv.fam) out = blocks::fam_forward(f, out, *lv.fam);
    skips.push_back(out);
    f = lv.down ? blocks::apply(*lv.down, out) : out;
  }
  f = blocks::fse_forward(f, bottleneck_);
  if (fsas_) f = blocks::fsas_forward(f, *fsas_);
  for (std::size_t k = ups_.size(); k-- > 0;) {
    const Up& up = ups_[k];
    ag::Var<T> d;
    if (up.transposed) {
      ag::Tape<T>& t = f.tape();
      d = ag::conv_transpose2d(f, t.param(up.conv.weight), t.param(up.conv.bias), up.conv.geom);
    } else {
      d = ag::pixel_shuffle(blocks::apply(up.conv, f), 2);
    }
    f = up.fam ? blocks::fam_forward(skips[k], d, *up.fam) : ag::add(skips[k], d);
  }
  return blocks::apply(head_, f);
}

template <typename T>
ag::Var<T> MoireNet<T>::forward(ag::Var<T> input) const {
  const Shape s = input.shape();
  if (s.c != 3) throw Error(ErrorCode::NotRGB, "network input must have 3 channels, got " + s.str());
  const std::size_t m = std::size_t{1} << (cfg_.scales - 1);
  const ops::Padding pad{0, (m - s.h % m) % m, 0, (m - s.w % m) % m};
  ag::Var<T> x = input;
  if (pad.bottom != 0 || pad.right != 0) x = ag::pad_reflect(input, pad);
  ag::Var<T> residual = forward_padded(x);
  if (pad.bottom != 0 || pad.right != 0) residual = ag::crop(residual, 0, 0, s.h, s.w);
  return ag::add(input, residual);
}

template <typename T>
Tensor<T> MoireNet<T>::forward(const Tensor<T>& input) const {
  ag::Tape<T> tape(false);
  return forward(tape.constant(input)).value();
}

template <typename T>
std::size_t MoireNet<T>::count_params() const {
  std::size_t total = 0;
  for_each_param([&](const std::string&, const Tensor<T>& t) { total += t.numel(); });
  return total;
}

template <typename T>
std::vector<std::pair<std::string, std::size_t>> MoireNet<T>::param_breakdown() const {
  std::vector<std::pair<std::string, std::size_t>> out;
  for_each_param([&](const std::string& name, const Tensor<T>& t) {
    // Level and bottleneck names keep their second component, e.g. "enc0.fam".
    const std::size_t dot = name.find('.');
    const bool nested = name.rfind("enc", 0) == 0 || name.rfind("dec", 0) == 0 || name.rfind("bottleneck", 0) == 0;
    const std::string top = name.substr(0, nested ? name.find('.', dot + 1) : dot);
    if (out.empty() || out.back().first != top) out.emplace_back(top, 0);
    out.back().second += t.numel();
  });
  return out;
}

template <typename U, typename T>
MoireNet<U> convert(const MoireNet<T>& net) {
  MoireNet<U> out = MoireNet<U>::build(net.config());
  std::vector<const Tensor<T>*> src;
  net.for_each_param([&](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
  std::size_t i = 0;
  out.for_each_param([&](const std::string&, Tensor<U>& t) { t = src[i++]->template cast<U>(); });
  return out;
}

template class MoireNet<float>;
template class MoireNet<double>;
template MoireNet<double> convert<double, float>(const MoireNet<float>&);
template MoireNet<float> convert<float, double>(const MoireNet<double>&);
template MoireNet<float> convert<float, float>(const MoireNet<float>&);

// ---- checkpoint ----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (len > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    len -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

bool is_vector_param(const std::string& name) {
  return name.size() < 7 || name.compare(name.size() - 7, 7, ".weight") != 0;
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t begin, std::size_t end) : b_(b), pos_(begin), end_(end) {}

  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string str(std::uint64_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  const std::uint8_t* skip(std::uint64_t len) {
    need(len);
    const std::uint8_t* p = b_.data() + pos_;
    pos_ += len;
    return p;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::uint64_t len) const {
    if (len > end_ - pos_) throw Error(ErrorCode::IoError, "checkpoint truncated");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_, end_;
};

struct Record {
  std::string name;
  std::vector<std::uint64_t> dims;
  const std::uint8_t* data;
  std::uint64_t count;
};

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const MoireNet<float>& net) {
  std::vector<std::uint8_t> b(kMagic, kMagic + 4);
  put_u32(b, kVersion);
  const std::string config = net.config().to_json().dump();
  put_u64(b, config.size());
  b.insert(b.end(), config.begin(), config.end());
  net.for_each_param([&](const std::string& name, const Tensor<float>& t) {
    put_u32(b, static_cast<std::uint32_t>(name.size()));
    b.insert(b.end(), name.begin(), name.end());
    const Shape& s = t.shape();
    if (is_vector_param(name)) {
      b.push_back(1);
      put_u64(b, t.numel());
    } else {
      b.push_back(4);
      for (std::size_t d : {s.n, s.c, s.h, s.w}) put_u64(b, d);
    }
    for (float v : t.values()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(b, bits);
    }
  });
  put_u32(b, crc32_of(b.data() + 4, b.size() - 4));
  return b;
}

void save_checkpoint(const MoireNet<float>& net, const std::string& path) {
  const auto bytes = checkpoint_bytes(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

MoireNet<float> parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not a checkpoint (magic mismatch)");
  }
  if (bytes.size() < 4 + 4 + 8 + 4) throw Error(ErrorCode::IoError, "checkpoint truncated");
  const std::size_t body_end = bytes.size() - 4;
  Reader r(bytes, 4, body_end);
  const auto version = static_cast<std::uint32_t>(r.uint(4));
  const std::string config_text = r.str(r.uint(8));
  std::vector<Record> records;
  while (!r.done()) {
    Record rec;
    rec.name = r.str(r.uint(4));
    const auto rank = static_cast<std::uint8_t>(r.uint(1));
    if (rank != 1 && rank != 4) throw Error(ErrorCode::IoError, "bad tensor rank in record " + rec.name);
    rec.count = 1;
    for (int i = 0; i < rank; ++i) {
      rec.dims.push_back(r.uint(8));
      if (rec.dims.back() != 0 && rec.count > (std::uint64_t{1} << 40) / rec.dims.back()) {
        throw Error(ErrorCode::IoError, "tensor too large in record " + rec.name);
      }
      rec.count *= rec.dims.back();
    }
    rec.data = r.skip(rec.count * 4);
    records.push_back(std::move(rec));
  }
  Reader tail(bytes, body_end, bytes.size());
  const auto stored_crc = static_cast<std::uint32_t>(tail.uint(4));
  if (stored_crc != crc32_of(bytes.data() + 4, body_end - 4)) throw Error(ErrorCode::CrcMismatch, "checkpoint CRC");
  if (version != kVersion) throw Error(ErrorCode::VersionUnsupported, "checkpoint version " + std::to_string(version));

  NetworkConfig cfg;
  try {
    cfg = NetworkConfig::from_json(nlohmann::json::parse(config_text));
    cfg.validate();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigMismatch, std::string("config blob: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigMismatch, e.what());
  }
  MoireNet<float> net = MoireNet<float>::build(cfg);
  std::size_t i = 0;
  net.for_each_param([&](const std::string& name, Tensor<float>& t) {
    if (i >= records.size()) throw Error(ErrorCode::ConfigMismatch, "missing parameter " + name);
    const Record& rec = records[i++];
    const Shape& s = t.shape();
    const std::vector<std::uint64_t> want =
        is_vector_param(name) ? std::vector<std::uint64_t>{t.numel()} : std::vector<std::uint64_t>{s.n, s.c, s.h, s.w};
    if (rec.name != name || rec.dims != want) {
      throw Error(ErrorCode::ConfigMismatch, "record " + rec.name + " does not match parameter " + name);
    }
    std::vector<float> values(rec.count);
    for (std::size_t k = 0; k < rec.count; ++k) {
      const std::uint8_t* p = rec.data + 4 * k;
      const std::uint32_t bits = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
                                 std::uint32_t(p[3]) << 24;
      std::memcpy(&values[k], &bits, 4);
    }
    t = Tensor<float>(s, std::move(values));
  });
  if (i != records.size()) throw Error(ErrorCode::ConfigMismatch, "checkpoint has extra parameter records");
  return net;
}

MoireNet<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed for " + path);
  return parse_checkpoint(bytes);
}

}  // namespace moire::net
