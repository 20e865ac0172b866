#include <benchmark/benchmark.h>

#include <random>

#include "ghlfd/detect.hpp"
#include "ghlfd/evaluate.hpp"
#include "ghlfd/neural.hpp"
#include "ghlfd/plant.hpp"

namespace {

using namespace ghlfd;

Matrix random_input(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d;
  Matrix m(rows, cols);
  for (auto& x : m.data()) x = d(gen);
  return m;
}

// args: w, hidden
void BM_LstmForward(benchmark::State& state) {
  const auto w = static_cast<std::size_t>(state.range(0));
  const auto h = static_cast<std::size_t>(state.range(1));
  LstmModel model(6, h, h, 0.1);
  model.initialize(1);
  const Matrix x = random_input(w, 6, 2);
  for (auto _ : state) {
    model.reset_state();
    benchmark::DoNotOptimize(model.forward(x));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w));
}
BENCHMARK(BM_LstmForward)->Args({30, 32})->Args({120, 32})->Args({120, 64});

void BM_LstmForwardBackward(benchmark::State& state) {
  const auto w = static_cast<std::size_t>(state.range(0));
  const auto h = static_cast<std::size_t>(state.range(1));
  LstmModel model(6, h, h, 0.1);
  model.initialize(1);
  const Matrix x = random_input(w, 6, 2), y = random_input(w, 6, 3);
  std::mt19937_64 rng(4);
  for (auto _ : state) {
    model.reset_state();
    ForwardTape tape;
    const Matrix pred = model.forward_train(x, tape, rng);
    benchmark::DoNotOptimize(model.backward(tape, mse_loss(pred, y).grad));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w));
}
BENCHMARK(BM_LstmForwardBackward)->Args({30, 32})->Args({120, 32})->Args({120, 64});

// One nominal cycle is about 11650 simulated seconds.
void BM_Simulate(benchmark::State& state) {
  PlantParams p;
  const double horizon = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(p, horizon, std::nullopt, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(12000)->Arg(120000)->Unit(benchmark::kMillisecond);

void BM_EmaSmooth(benchmark::State& state) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u;
  std::vector<double> raw(static_cast<std::size_t>(state.range(0)));
  for (auto& x : raw) x = u(gen);
  for (auto _ : state) benchmark::DoNotOptimize(ema_smooth(raw, 240.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmaSmooth)->Arg(100000);

void BM_ThresholdSweep(benchmark::State& state) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u;
  std::vector<TraceErrors> traces(10);
  for (auto& t : traces) {
    t.smoothed.resize(6000);
    t.danger.assign(6000, 0);
    for (std::size_t i = 0; i < 6000; ++i) {
      t.smoothed[i] = u(gen);
      t.danger[i] = i > 3000;
    }
  }
  const auto grid = threshold_grid(0.0, 1.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sweep_thresholds(traces, grid, 120));
}
BENCHMARK(BM_ThresholdSweep)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
