#include <benchmark/benchmark.h>

#include "amisr/losses.hpp"
#include "amisr/network.hpp"
#include "amisr/optim.hpp"

using namespace amisr;

namespace {

ArchConfig arch(int64_t channels, int64_t size) {
  ArchConfig cfg;
  cfg.base_channels = static_cast<int>(channels);
  cfg.input_size = static_cast<int>(size);
  return cfg;
}

Tensor<float> image(int64_t size) {
  Rng rng(9);
  Tensor<float> t(Shape(1, 3, size, size));
  for (float& v : t.mutable_data()) v = static_cast<float>(rng.uniform());
  return t;
}

void BM_Forward(benchmark::State& state) {
  const auto cfg = arch(state.range(0), state.range(1));
  Rng rng(1);
  auto params = build<float>(cfg, rng);
  const auto x = image(cfg.input_size);
  for (auto _ : state) benchmark::DoNotOptimize(infer(cfg, params, x));
  state.counters["MAC/s"] =
      benchmark::Counter(double(mac_estimate(cfg)) * double(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Forward)->Args({8, 64})->Args({8, 128})->Args({16, 128})->Unit(benchmark::kMillisecond);

// One plain training step: forward on the tape, pixel loss, backward, Adam.
void BM_TrainStep(benchmark::State& state) {
  const auto cfg = arch(state.range(0), state.range(1));
  Rng rng(1);
  auto params = build<float>(cfg, rng);
  Adam<float> adam(params, {});
  const auto x = image(cfg.input_size);
  const auto y = image(cfg.input_size);
  for (auto _ : state) {
    params.zero_grad();
    Tape<float> tape;
    Binder<float> b(params, &tape);
    tape.backward(pixel_loss(forward(cfg, b, Var<float>(x)), Var<float>(y)));
    adam.step();
  }
}
BENCHMARK(BM_TrainStep)->Args({8, 64})->Args({8, 128})->Unit(benchmark::kMillisecond);

}  // namespace
