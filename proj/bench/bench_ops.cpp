#include <benchmark/benchmark.h>

#include "moire/ops.hpp"
#include "moire/reference.hpp"
#include "moire/rng.hpp"

using namespace moire;

namespace {

// Conv geometries that dominate a training step of the default network.
struct Case {
  std::size_t n, cin, cout, hw;
  int k, groups;
};

constexpr Case kCases[] = {
    {2, 96, 32, 64, 3, 4},    {2, 128, 128, 16, 3, 1}, {2, 64, 64, 32, 3, 1},  {2, 192, 64, 32, 3, 4},
    {2, 512, 512, 8, 3, 4},   {2, 32, 32, 64, 3, 32},  {2, 32, 32, 64, 3, 1},
};

Tensor<float> random(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  return rng.uniform_tensor<float>(s, -1.0, 1.0);
}

struct Inputs {
  Tensor<float> x, w, b, gy;
  ops::ConvGeometry g;
};

Inputs make(const Case& c) {
  Inputs in;
  in.g = ops::ConvGeometry{1, c.k / 2, c.groups};
  const Shape ws{c.cout, c.cin / static_cast<std::size_t>(c.groups), static_cast<std::size_t>(c.k),
                 static_cast<std::size_t>(c.k)};
  in.x = random(Shape{c.n, c.cin, c.hw, c.hw}, 1);
  in.w = random(ws, 2);
  in.b = random(Shape{1, c.cout, 1, 1}, 3);
  in.gy = random(ops::conv2d_output_shape(in.x.shape(), ws, in.g), 4);
  return in;
}

void label(benchmark::State& state, const Case& c) {
  state.SetLabel(std::to_string(c.cin) + "->" + std::to_string(c.cout) + " g" + std::to_string(c.groups) + " " +
                 std::to_string(c.hw) + "px");
  const double flops = 2.0 * c.n * c.cout * (c.cin / c.groups) * c.k * c.k * c.hw * c.hw;
  state.counters["GFLOP/s"] = benchmark::Counter(flops * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_conv_forward(benchmark::State& state) {
  const Case& c = kCases[state.range(0)];
  const Inputs in = make(c);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(in.x, in.w, in.b, in.g));
  label(state, c);
}

void BM_conv_forward_reference(benchmark::State& state) {
  const Case& c = kCases[state.range(0)];
  const Inputs in = make(c);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d(in.x, in.w, in.b, in.g));
  label(state, c);
}

void BM_conv_grad_input(benchmark::State& state) {
  const Case& c = kCases[state.range(0)];
  const Inputs in = make(c);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d_grad_input(in.gy, in.w, in.x.shape(), in.g));
  label(state, c);
}

void BM_conv_grad_weight(benchmark::State& state) {
  const Case& c = kCases[state.range(0)];
  const Inputs in = make(c);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d_grad_weight(in.gy, in.x, in.w.shape(), in.g));
  label(state, c);
}

void BM_conv_transpose(benchmark::State& state) {
  const Tensor<float> x = random(Shape{2, 64, 32, 32}, 5);
  const Tensor<float> w = random(Shape{64, 32, 4, 4}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv_transpose2d(x, w, Tensor<float>{}, {2, 1, 1}));
}

void BM_conv_transpose_reference(benchmark::State& state) {
  const Tensor<float> x = random(Shape{2, 64, 32, 32}, 5);
  const Tensor<float> w = random(Shape{64, 32, 4, 4}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv_transpose2d(x, w, Tensor<float>{}, {2, 1, 1}));
}

void BM_pixel_shuffle(benchmark::State& state) {
  const Tensor<float> x = random(Shape{2, 128, 32, 32}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(ops::pixel_shuffle(x, 2));
}

void BM_pixel_shuffle_reference(benchmark::State& state) {
  const Tensor<float> x = random(Shape{2, 128, 32, 32}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(reference::pixel_shuffle(x, 2));
}

void BM_channel_stats(benchmark::State& state) {
  const Tensor<float> x = random(Shape{2, 128, 64, 64}, 8);
  for (auto _ : state) benchmark::DoNotOptimize(ops::channel_stats(x));
}

void BM_channel_stats_reference(benchmark::State& state) {
  const Tensor<float> x = random(Shape{2, 128, 64, 64}, 8);
  for (auto _ : state) benchmark::DoNotOptimize(reference::channel_stats(x));
}

void all_cases(benchmark::internal::Benchmark* b) {
  for (std::size_t i = 0; i < std::size(kCases); ++i) b->Arg(static_cast<int>(i));
}

}  // namespace

BENCHMARK(BM_conv_forward)->Apply(all_cases)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_conv_forward_reference)->Apply(all_cases)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_conv_grad_input)->Apply(all_cases)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_conv_grad_weight)->Apply(all_cases)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_conv_transpose)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_conv_transpose_reference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_pixel_shuffle)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_pixel_shuffle_reference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_channel_stats)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_channel_stats_reference)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
