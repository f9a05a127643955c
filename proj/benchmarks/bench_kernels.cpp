#include <benchmark/benchmark.h>

#include "amisr/kernels.hpp"
#include "amisr/rng.hpp"

using namespace amisr;

namespace {

Tensor<float> noise(const Shape& s, uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(s);
  for (float& v : t.mutable_data()) v = static_cast<float>(rng.normal());
  return t;
}

// args: channels, spatial size, kernel, groups (0 = depthwise)
void BM_Conv2d(benchmark::State& state) {
  const int64_t c = state.range(0), s = state.range(1), k = state.range(2);
  const int groups = state.range(3) == 0 ? static_cast<int>(c) : static_cast<int>(state.range(3));
  const auto x = noise(Shape(1, c, s, s), 1);
  const auto w = noise(Shape(c, c / groups, k, k), 2);
  const kernels::ConvGeometry g{1, static_cast<int>(k / 2), groups};
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d<float>(x, w, nullptr, g));
  state.counters["MAC/s"] = benchmark::Counter(double(c * (c / groups) * k * k * s * s) * double(state.iterations()),
                                               benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Conv2d)
    ->Args({8, 128, 3, 1})
    ->Args({16, 64, 3, 1})
    ->Args({64, 16, 3, 1})
    ->Args({8, 128, 7, 0})
    ->Args({8, 128, 1, 1})
    ->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const int64_t c = state.range(0), s = state.range(1);
  const auto x = noise(Shape(1, c, s, s), 1);
  const auto w = noise(Shape(c, c, 3, 3), 2);
  const auto gy = noise(Shape(1, c, s, s), 3);
  for (auto _ : state) {
    Tensor<float> gx(x.shape()), gw(w.shape());
    kernels::conv2d_backward<float>(x, w, gy, {1, 1, 1}, &gx, &gw, nullptr);
    benchmark::DoNotOptimize(gx.ptr());
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 128})->Args({64, 16})->Unit(benchmark::kMicrosecond);

void BM_TransposedConv(benchmark::State& state) {
  const int64_t c = state.range(0), s = state.range(1);
  const auto x = noise(Shape(1, 2 * c, s, s), 1);
  const auto w = noise(Shape(2 * c, c, 2, 2), 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::transposed_conv2d<float>(x, w, nullptr, 0, 0));
}
BENCHMARK(BM_TransposedConv)->Args({8, 64})->Args({32, 16})->Unit(benchmark::kMicrosecond);

// Attention-shaped batched matmul: (1, heads, C/heads, HW) x (1, heads, HW, C/heads).
void BM_Matmul(benchmark::State& state) {
  const int64_t m = state.range(0), k = state.range(1);
  const auto a = noise(Shape(1, 4, m, k), 1);
  const auto b = noise(Shape(1, 4, k, m), 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, b));
}
BENCHMARK(BM_Matmul)->Args({2, 16384})->Args({16, 256})->Unit(benchmark::kMicrosecond);

}  // namespace
