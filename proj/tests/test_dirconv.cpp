#include <doctest.h>

#include "moire/dirconv.hpp"
#include "moire/rng.hpp"
#include "support/oracles.hpp"

using namespace moire;
using namespace moire::dirconv;

namespace {

double tap_sum(const Tensor<double>& w, std::size_t o, std::size_t i) {
  double s = 0;
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) s += w(o, i, y, x);
  return s;
}

DacParams<double> select_branch(DacParams<double> p, std::size_t k, double a) {
  p.alpha = Tensor<double>::zeros(Shape{1, 5, 1, 1});
  p.alpha[k] = a;
  return p;
}

}  // namespace

TEST_CASE("masks are zero-sum transposes") {
  double sv = 0, sh = 0;
  for (std::size_t i = 0; i < 9; ++i) {
    sv += vertical_mask()[i];
    sh += horizontal_mask()[i];
  }
  CHECK(sv == 0.0);
  CHECK(sh == 0.0);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(horizontal_mask()[r * 3 + c] == vertical_mask()[c * 3 + r]);
  CHECK(vertical_mask()[1] == 10.0 / 16);
  CHECK(vertical_mask()[7] == -10.0 / 16);
}

TEST_CASE("central difference kernel") {
  const auto w = cdc_kernel(Tensor<double>::ones(Shape{1, 1, 3, 3}));
  for (std::size_t i = 0; i < 9; ++i) CHECK(w[i] == (i == 4 ? -8.0 : 1.0));
  Rng rng(1);
  const auto r = cdc_kernel(rng.uniform_tensor<double>(Shape{3, 2, 3, 3}, -1, 1));
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(tap_sum(r, o, i)) < 1e-14);
}

TEST_CASE("angular difference kernel") {
  CHECK(adc_kernel(Tensor<double>::full(Shape{2, 2, 3, 3}, 0.4)) == Tensor<double>::zeros(Shape{2, 2, 3, 3}));
  Rng rng(2);
  const auto w = rng.uniform_tensor<double>(Shape{2, 3, 3, 3}, -1, 1);
  const auto a = adc_kernel(w);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a(o, i, 1, 1) == 0.0);
      CHECK(std::abs(tap_sum(a, o, i)) < 1e-14);
    }
  // A lone tap at the top-middle ring slot (index 1) shows up as +v there and
  // -v at the next slot clockwise (top-right).
  Tensor<double> one(Shape{1, 1, 3, 3});
  one(0, 0, 0, 1) = 0.6;
  const auto d = adc_kernel(one);
  CHECK(d(0, 0, 0, 1) == 0.6);
  CHECK(d(0, 0, 0, 2) == -0.6);
  double rest = 0;
  for (std::size_t i = 0; i < 9; ++i) rest += std::abs(d[i]);
  CHECK(rest == doctest::Approx(1.2));
}

TEST_CASE("directional difference kernels") {
  const auto ones = Tensor<double>::ones(Shape{1, 1, 3, 3});
  const auto v = vmdc_kernel(ones), h = hmdc_kernel(ones);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(v[i] == vertical_mask()[i]);
    CHECK(h[i] == horizontal_mask()[i]);
  }
  Rng rng(3);
  const auto w = rng.uniform_tensor<double>(Shape{2, 2, 3, 3}, -1, 1);
  Tensor<double> wt(w.shape());
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x) wt(o, i, y, x) = w(o, i, x, y);
  const auto vm = vmdc_kernel(w), hm = hmdc_kernel(wt);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t y = 0; y < 3; ++y) {
        CHECK(vm(o, i, 1, y) == 0.0);
        for (std::size_t x = 0; x < 3; ++x) CHECK(hm(o, i, y, x) == vm(o, i, x, y));
      }
}

TEST_CASE("transforms reject other kernel sizes") {
  for (auto b : {Branch::Cdc, Branch::Adc, Branch::Hmdc, Branch::Vmdc}) {
    try {
      branch_kernel(Tensor<float>::ones(Shape{1, 1, 5, 5}), b);
      FAIL("expected NotThreeByThree");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotThreeByThree);
    }
  }
}

TEST_CASE("fusion selection, constants and linearity") {
  Rng rng(4);
  auto p = oracle::random_dac<double>(rng, 3, 4);
  const auto only_conv = dac_fuse(select_branch(p, 0, 1.0));
  CHECK(only_conv.weight == p.weights[0]);
  CHECK(only_conv.bias == p.biases[0]);

  DacParams<double> z;
  for (std::size_t k = 0; k < 5; ++k) {
    z.weights[k] = Tensor<double>::zeros(Shape{2, 2, 3, 3});
    z.biases[k] = Tensor<double>::full(Shape{1, 2, 1, 1}, 0.2);
  }
  z.alpha = Tensor<double>::ones(Shape{1, 5, 1, 1});
  const auto fz = dac_fuse(z);
  CHECK(fz.weight == Tensor<double>::zeros(Shape{2, 2, 3, 3}));
  for (double v : fz.bias.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  const auto base = dac_fuse(p);
  auto doubled = p;
  for (auto& a : doubled.alpha.data()) a *= 2;
  const auto twice = dac_fuse(doubled);
  for (std::size_t i = 0; i < base.weight.numel(); ++i) CHECK(twice.weight[i] == 2 * base.weight[i]);
  for (std::size_t i = 0; i < base.bias.numel(); ++i) CHECK(twice.bias[i] == 2 * base.bias[i]);
}

TEST_CASE("fused forward equals the weighted branch sum") {
  Rng rng(5);
  for (int draw = 0; draw < 25; ++draw) {
    const auto p = oracle::random_dac<float>(rng, 3, 5);
    const auto x = rng.uniform_tensor<float>(Shape{2, 3, 9, 8}, -1, 1);
    const auto fused = dac_forward(x, p);
    CHECK(bitwise_equal(fused, ops::conv2d(x, dac_fuse(p))));
    CHECK(oracle::max_abs(fused, oracle::dac_branch_sum(x, p)) < 1e-4);
  }
}

TEST_CASE("difference branches annihilate constant input") {
  Rng rng(6);
  const auto p = oracle::random_dac<double>(rng, 3, 2);
  const auto x = Tensor<double>::full(Shape{1, 3, 7, 7}, 0.8);
  for (std::size_t k : {1u, 2u}) {
    const auto q = select_branch(p, k, 0.7);
    const auto y = dac_forward(x, q);
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t yy = 1; yy < 6; ++yy)
        for (std::size_t xx = 1; xx < 6; ++xx) CHECK(std::abs(y(0, o, yy, xx) - 0.7 * p.biases[k][o]) < 1e-6);
  }
}

TEST_CASE("directional branches see only their gradient direction") {
  Tensor<double> vert(Shape{1, 1, 6, 6}), horz(Shape{1, 1, 6, 6});
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 6; ++x) {
      vert(0, 0, y, x) = 0.1 * y;
      horz(0, 0, y, x) = 0.1 * x;
    }
  const auto ones = Tensor<double>::ones(Shape{1, 1, 3, 3});
  auto interior = [](const Tensor<double>& t) { return ops::crop(t, 1, 1, 4, 4); };
  const auto vv = interior(ops::conv2d(vert, vmdc_kernel(ones), Tensor<double>(), ops::ConvGeometry{1, 1, 1}));
  const auto vh = interior(ops::conv2d(horz, vmdc_kernel(ones), Tensor<double>(), ops::ConvGeometry{1, 1, 1}));
  const auto hh = interior(ops::conv2d(horz, hmdc_kernel(ones), Tensor<double>(), ops::ConvGeometry{1, 1, 1}));
  const auto hv = interior(ops::conv2d(vert, hmdc_kernel(ones), Tensor<double>(), ops::ConvGeometry{1, 1, 1}));
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(std::abs(vv[i]) == doctest::Approx(0.2));
    CHECK(std::abs(vh[i]) < 1e-12);
    CHECK(std::abs(hh[i]) == doctest::Approx(0.2));
    CHECK(std::abs(hv[i]) < 1e-12);
  }
}

TEST_CASE("parameter count is five convolutions plus the coefficients") {
  Rng rng(7);
  const auto p = oracle::random_dac<float>(rng, 3, 8);
  CHECK(count_params(p) == 5 * (8 * 3 * 9 + 8) + 5);
}

TEST_CASE("dac gradients") {
  Rng rng(8);
  auto p = oracle::random_dac<double>(rng, 2, 3);
  auto x = rng.uniform_tensor<double>(Shape{1, 2, 6, 6}, -1, 1);
  std::vector<Tensor<double>*> targets{&x, &p.alpha};
  for (std::size_t k = 0; k < 5; ++k) {
    targets.push_back(&p.weights[k]);
    targets.push_back(&p.biases[k]);
  }
  const auto report = ag::finite_diff_check_params<double>(
      [&](ag::Tape<double>& t) { return dac_forward(t.param(x), p); }, targets);
  CHECK(report.max_rel_error < 1e-3);

  using V = std::vector<ag::Var<double>>;
  for (auto b : {Branch::Cdc, Branch::Adc, Branch::Hmdc, Branch::Vmdc}) {
    CHECK(ag::finite_diff_check<double>([b](ag::Tape<double>&, const V& v) { return branch_kernel(v[0], b); },
                                        {rng.uniform_tensor<double>(Shape{2, 2, 3, 3}, -1, 1)})
              .max_rel_error < 1e-3);
  }
}
