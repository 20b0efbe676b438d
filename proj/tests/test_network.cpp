#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <zlib.h>

#include "moire/network.hpp"

using namespace moire;
using namespace moire::net;

namespace {

NetworkConfig tiny(bool dac = true, bool dru = true, bool fsas = true, bool fam = true) {
  NetworkConfig c;
  c.widths = {8, 16, 16};
  c.scales = 3;
  c.groups = 2;
  c.dac_enabled = dac;
  c.dru_enabled = dru;
  c.fsas_enabled = fsas;
  c.fam_enabled = fam;
  c.seed = 3;
  return c;
}

template <typename T>
std::map<std::string, Shape> shapes_of(const MoireNet<T>& net) {
  std::map<std::string, Shape> out;
  net.for_each_param([&](const std::string& name, const Tensor<T>& t) { out.emplace(name, t.shape()); });
  return out;
}

template <typename T>
bool same_params(const MoireNet<T>& a, const MoireNet<T>& b) {
  std::vector<std::vector<T>> va, vb;
  a.for_each_param([&](const std::string&, const Tensor<T>& t) { va.push_back(t.values()); });
  b.for_each_param([&](const std::string&, const Tensor<T>& t) { vb.push_back(t.values()); });
  return va == vb;
}

// Layer-by-layer count of the documented topology.
std::size_t enumerate(const NetworkConfig& c) {
  auto conv = [](std::size_t ci, std::size_t co, std::size_t k, std::size_t g = 1) { return co * (ci / g) * k * k + co; };
  auto res = [&](std::size_t ch) { return 2 * conv(ch, ch, 3); };
  auto core = [&](std::size_t ch) { return conv(ch, ch, 3, ch) + conv(4 * ch, 4 * ch, 3, 4); };
  auto fse = [&](std::size_t ch) { return core(ch) + 2 * res(ch); };
  auto fam = [&](std::size_t ch) {
    const std::size_t h = std::max<std::size_t>(1, ch / 8);
    return conv(2, 1, 7) + conv(ch, h, 1) + conv(h, ch, 1) + conv(3 * ch, ch, 3, c.groups) + 2 * conv(ch, ch, 1);
  };
  const auto& w = c.widths;
  std::size_t n = conv(3, w[0], 3);
  n += c.dac_enabled ? 5 * conv(w[0], w[0], 3) + 5 : conv(w[0], w[0], 3);
  n += core(w[0]);
  n += c.dru_enabled ? 2 * res(w[0] / 2) + conv(w[0], w[0], 1) : 2 * res(w[0]);
  for (std::size_t i = 1; i < c.scales; ++i) n += fse(w[i]);
  for (std::size_t i = 0; i + 1 < c.scales; ++i) n += conv(w[i], w[i + 1], 3);
  n += fse(w.back());
  if (c.fsas_enabled) n += conv(2, 1, 7) + conv(3 * w.back(), w.back(), 3, c.groups) + conv(w.back(), w.back(), 1) + 2;
  for (std::size_t i = 1; i + 1 < c.scales; ++i) n += conv(w[i + 1], 4 * w[i], 1);
  if (c.scales > 1) n += w[1] * w[0] * 16 + w[0];
  if (c.fam_enabled) {
    for (std::size_t i = 0; i < c.scales; ++i) n += fam(w[i]);
    for (std::size_t i = 0; i + 1 < c.scales; ++i) n += fam(w[i]);
  }
  return n + conv(w[0], 3, 3);
}

Tensor<float> image(Rng& rng, std::size_t h, std::size_t w, std::size_t n = 1) {
  return rng.uniform_tensor<float>(Shape{n, 3, h, w}, 0.0, 1.0);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("moire_test_" + name)).string();
}

ErrorCode parse_error(const std::vector<std::uint8_t>& bytes) {
  try {
    parse_checkpoint(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("checkpoint parsed");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(NetworkConfig{}.validate());
  NetworkConfig c;
  c.widths = {32, 64};
  CHECK_THROWS_AS(c.validate(), Error);
  c = NetworkConfig{};
  c.widths = {32, 64, 130};
  CHECK_THROWS_AS(c.validate(), Error);
  c = NetworkConfig{};
  c.groups = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = NetworkConfig{};
  c.scales = 0;
  c.widths = {};
  CHECK_THROWS_AS(MoireNet<float>::build(c), Error);

  const NetworkConfig t = tiny(true, false, true, false);
  CHECK(NetworkConfig::from_json(t.to_json()) == t);
  CHECK(NetworkConfig::from_json(nlohmann::json::object()) == NetworkConfig{});
  CHECK_THROWS_AS(NetworkConfig::from_json(nlohmann::json{{"scales", "three"}}), Error);
  CHECK(t.to_json().size() == NetworkConfig::keys().size());
}

TEST_CASE("identity at initialization") {
  Rng rng(11);
  const auto net = MoireNet<float>::build(NetworkConfig{});
  for (auto [h, w] : {std::pair{64, 64}, {32, 48}, {63, 61}, {8, 8}}) {
    const auto x = image(rng, h, w);
    const auto y = net.forward(x);
    CHECK(y.shape() == x.shape());
    CHECK(y.values() == x.values());
  }
  const auto batch = image(rng, 20, 24, 2);
  CHECK(net.forward(batch).values() == batch.values());
}

TEST_CASE("shape preservation with a live head") {
  Rng rng(5);
  auto net = MoireNet<float>::build(tiny());
  net.for_each_param([&](const std::string& name, Tensor<float>& t) {
    if (name == "head.weight") t = rng.uniform_tensor<float>(t.shape(), -0.1, 0.1);
  });
  for (std::size_t h : {8u, 9u, 13u, 16u})
    for (std::size_t w : {8u, 11u, 16u}) {
      const auto x = image(rng, h, w);
      const auto y = net.forward(x);
      CHECK(y.shape() == x.shape());
      CHECK(y.values() != x.values());
    }
  const auto x = image(rng, 63, 61);
  CHECK(net.forward(x).shape() == Shape{1, 3, 63, 61});
}

TEST_CASE("forward rejects non-RGB input") {
  const auto net = MoireNet<float>::build(tiny());
  CHECK_THROWS_AS(net.forward(Tensor<float>(Shape{1, 1, 16, 16})), Error);
  try {
    net.forward(Tensor<float>(Shape{1, 4, 16, 16}));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotRGB);
  }
}

TEST_CASE("determinism") {
  const auto a = MoireNet<float>::build(NetworkConfig{});
  const auto b = MoireNet<float>::build(NetworkConfig{});
  CHECK(same_params(a, b));
  NetworkConfig other;
  other.seed = 1;
  CHECK_FALSE(same_params(a, MoireNet<float>::build(other)));

  Rng rng(2);
  auto live = MoireNet<float>::build(tiny());
  live.for_each_param([&](const std::string& name, Tensor<float>& t) {
    if (name == "head.weight") t = rng.uniform_tensor<float>(t.shape(), -0.1, 0.1);
  });
  const auto x = image(rng, 24, 20);
  CHECK(live.forward(x).values() == live.forward(x).values());
}

TEST_CASE("parameter names are unique and ordered") {
  const auto net = MoireNet<float>::build(NetworkConfig{});
  std::vector<std::string> names;
  net.for_each_param([&](const std::string& n, const Tensor<float>&) { names.push_back(n); });
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
  CHECK(names.front() == "shallow.weight");
  CHECK(names.back() == "head.bias");
  CHECK(std::find(names.begin(), names.end(), "bottleneck.fsas.a") != names.end());
  CHECK(std::find(names.begin(), names.end(), "dec0.up.weight") != names.end());
}

TEST_CASE("parameter count") {
  Rng rng(0);
  const auto single = blocks::make_conv<float>(3, 32, 3, rng);
  CHECK(single.weight.numel() + single.bias.numel() == 896);

  for (const auto& cfg : {tiny(), tiny(false, false, false, false), tiny(true, false, false, true),
                          tiny(false, true, true, false), NetworkConfig{}}) {
    const auto net = MoireNet<float>::build(cfg);
    CHECK(net.count_params() == enumerate(cfg));
    std::size_t sum = 0;
    for (const auto& [name, n] : net.param_breakdown()) sum += n;
    CHECK(sum == net.count_params());
  }
  const auto def = MoireNet<float>::build(NetworkConfig{});
  MESSAGE("default parameters: " << def.count_params());

  const auto before = def.count_params();
  Rng r(1);
  def.forward(image(r, 16, 16));
  CHECK(def.count_params() == before);
}

TEST_CASE("ablation switches change only the named parameter set") {
  auto diff = [](const NetworkConfig& off, const NetworkConfig& on) {
    const auto a = shapes_of(MoireNet<float>::build(off));
    const auto b = shapes_of(MoireNet<float>::build(on));
    std::map<std::string, Shape> removed, added;
    for (const auto& [n, s] : a) {
      auto it = b.find(n);
      if (it == b.end()) {
        removed.emplace(n, s);
      } else {
        CHECK_MESSAGE(it->second == s, n);
      }
    }
    for (const auto& [n, s] : b)
      if (!a.count(n)) added.emplace(n, s);
    return std::pair{removed, added};
  };
  auto numel = [](const std::map<std::string, Shape>& m) {
    std::size_t n = 0;
    for (const auto& [name, s] : m) n += s.numel();
    return n;
  };

  SUBCASE("+DAC") {
    const auto [removed, added] = diff(tiny(false), tiny(true));
    REQUIRE(removed.size() == 2);
    CHECK(removed.count("enc0.stage.front.weight"));
    CHECK(added.size() == 11);
    const std::size_t kernel = removed.at("enc0.stage.front.weight").numel();
    const std::size_t bias = removed.at("enc0.stage.front.bias").numel();
    CHECK(numel(added) - numel(removed) == 4 * (kernel + bias) + 5);
    CHECK(added.count("enc0.stage.dac.alpha"));
  }
  SUBCASE("+DRU") {
    const auto [removed, added] = diff(tiny(true, false), tiny(true, true));
    for (const auto& [n, s] : removed) CHECK(n.rfind("enc0.stage.res", 0) == 0);
    for (const auto& [n, s] : added) CHECK(n.rfind("enc0.stage.dru.", 0) == 0);
  }
  SUBCASE("+FSAS") {
    const auto [removed, added] = diff(tiny(true, true, false), tiny());
    CHECK(removed.empty());
    for (const auto& [n, s] : added) CHECK(n.rfind("bottleneck.fsas.", 0) == 0);
    CHECK(added.size() == 8);
  }
  SUBCASE("+FAM") {
    const auto [removed, added] = diff(tiny(true, true, true, false), tiny());
    CHECK(removed.empty());
    for (const auto& [n, s] : added) CHECK(n.find(".fam.") != std::string::npos);
    CHECK(added.size() == 12 * 5);
  }
}

TEST_CASE("double conversion keeps values") {
  const auto f = MoireNet<float>::build(tiny());
  const auto d = convert<double>(f);
  const auto back = convert<float>(d);
  CHECK(same_params(f, back));
  Rng rng(4);
  const auto x = image(rng, 16, 16);
  CHECK(d.forward(x.cast<double>()).cast<float>().values() == x.values());
}

TEST_CASE("checkpoint round trip") {
  Rng rng(9);
  auto net = MoireNet<float>::build(tiny(true, false, true, true));
  net.for_each_param([&](const std::string&, Tensor<float>& t) { t = rng.uniform_tensor<float>(t.shape(), -1, 1); });
  const std::string path = temp_path("roundtrip.mnck");
  save_checkpoint(net, path);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.config() == net.config());
  CHECK(same_params(loaded, net));
  CHECK(checkpoint_bytes(loaded) == checkpoint_bytes(net));

  // Header layout and payload size.
  const auto bytes = checkpoint_bytes(net);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MNCK");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  std::size_t header = 4 + 4 + 8 + net.config().to_json().dump().size() + 4;
  net.for_each_param([&](const std::string& n, const Tensor<float>& t) {
    header += 4 + n.size() + 1 + 8 * (n.size() > 7 && n.substr(n.size() - 7) == ".weight" ? 4 : 1);
    (void)t;
  });
  CHECK((bytes.size() - header) / 4 == net.count_params());
  CHECK((bytes.size() - header) % 4 == 0);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint corruption") {
  const auto net = MoireNet<float>::build(tiny(false, false, false, false));
  const auto good = checkpoint_bytes(net);

  auto flipped = good;
  flipped[good.size() / 2] ^= 0x10;
  CHECK(parse_error(flipped) == ErrorCode::CrcMismatch);

  auto magic = good;
  magic[0] = 'X';
  CHECK(parse_error(magic) == ErrorCode::BadMagic);
  CHECK(parse_error({'M', 'N'}) == ErrorCode::BadMagic);

  for (std::size_t keep : {std::size_t{8}, std::size_t{30}, good.size() / 3, good.size() - 1}) {
    const std::vector<std::uint8_t> cut(good.begin(), good.begin() + keep);
    const ErrorCode code = parse_error(cut);
    CHECK((code == ErrorCode::IoError || code == ErrorCode::CrcMismatch));
  }

  // Rewrite a field and fix the CRC so only the targeted check can fire.
  auto recrc = [](std::vector<std::uint8_t> b) {
    b.resize(b.size() - 4);
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, b.data() + 4, static_cast<uInt>(b.size() - 4));
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    return b;
  };
  auto version = good;
  version[4] = 2;
  CHECK(parse_error(recrc(version)) == ErrorCode::VersionUnsupported);

  // A blob that claims a different width no longer matches the records.
  const std::string blob = net.config().to_json().dump();
  NetworkConfig other = net.config();
  other.widths[0] = 4;
  std::string changed = other.to_json().dump();
  REQUIRE(changed.size() == blob.size());
  auto mismatched = good;
  std::copy(changed.begin(), changed.end(), mismatched.begin() + 16);
  CHECK(parse_error(recrc(mismatched)) == ErrorCode::ConfigMismatch);

  CHECK_THROWS_AS(load_checkpoint(temp_path("does_not_exist.mnck")), Error);
}

TEST_CASE("end-to-end gradient with respect to the shallow conv") {
  Rng rng(21);
  auto net = convert<double>(MoireNet<float>::build(NetworkConfig{}));
  // A zero head would make every upstream gradient vanish.
  net.for_each_param([&](const std::string& name, Tensor<double>& t) {
    if (name == "head.weight") t = rng.uniform_tensor<double>(t.shape(), -0.05, 0.05);
    if (name == "bottleneck.fsas.a") t[0] = 0.5;
  });
  Tensor<double>* shallow = nullptr;
  net.for_each_param([&](const std::string& name, Tensor<double>& t) {
    if (name == "shallow.weight") shallow = &t;
  });
  const auto x = rng.uniform_tensor<double>(Shape{1, 3, 16, 16}, 0, 1);
  ag::GradCheckOptions opts;
  opts.max_coords = 24;
  const auto report = ag::finite_diff_check_params<double>(
      [&](ag::Tape<double>& t) { return net.forward(t.constant(x)); }, {shallow}, opts);
  MESSAGE("network max relative error " << report.max_rel_error);
  CHECK(report.coords == 24);
  CHECK(report.max_rel_error < 1e-2);
}
