// Serial reference vs OpenMP path for the hot kernels. The second benchmark
// argument selects the path (0 serial, 1 parallel); the third is the worker
// count used for the parallel path.

#include <vector>

#include <benchmark/benchmark.h>

#include "canonlift/kernels.hpp"
#include "canonlift/rng.hpp"

using namespace canonlift;

namespace {

constexpr int kCells = 16;
constexpr std::size_t kChannels = 9;  // D + 1 for D = 8

struct Inputs {
  std::vector<float> points, values, scales, grid, out;
};

Inputs make_inputs(std::size_t m) {
  Rng rng(1);
  Inputs in;
  in.points.resize(3 * m);
  in.values.resize(kChannels * m);
  in.scales.resize(m);
  in.grid.resize(static_cast<std::size_t>(kCells * kCells * kCells) * kChannels);
  in.out.resize(kChannels * m);
  for (auto& v : in.points) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  for (auto& v : in.values) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : in.scales) v = static_cast<float>(rng.uniform());
  for (auto& v : in.grid) v = static_cast<float>(rng.uniform(-1, 1));
  return in;
}

kernels::Exec setup(const benchmark::State& state) {
  kernels::set_num_threads(static_cast<int>(state.range(2)));
  return state.range(1) ? kernels::Exec::Parallel : kernels::Exec::Serial;
}

void BM_Splat(benchmark::State& state) {
  const auto exec = setup(state);
  auto in = make_inputs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    std::fill(in.grid.begin(), in.grid.end(), 0.0f);
    kernels::splat<float>(kCells, kChannels, in.points, in.values, in.scales, in.grid, exec);
    benchmark::DoNotOptimize(in.grid.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SplatBackward(benchmark::State& state) {
  const auto exec = setup(state);
  auto in = make_inputs(static_cast<std::size_t>(state.range(0)));
  std::vector<float> gp(in.points.size()), gv(in.values.size()), gs(in.scales.size());
  for (auto _ : state) {
    kernels::splat_backward<float>(kCells, kChannels, in.points, in.values, in.scales, in.grid,
                                   gp, gv, gs, exec);
    benchmark::DoNotOptimize(gp.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Sample(benchmark::State& state) {
  const auto exec = setup(state);
  auto in = make_inputs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    kernels::sample<float>(kCells, kChannels, in.grid, in.points, in.out, exec);
    benchmark::DoNotOptimize(in.out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Dense(benchmark::State& state) {
  const auto exec = setup(state);
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t in = 64, out = 32;
  Rng rng(2);
  std::vector<float> x(rows * in), W(in * out), b(out), y(rows * out);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : W) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto _ : state) {
    kernels::dense_forward<float>(x, rows, in, W, out, b, y, exec);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void args(benchmark::internal::Benchmark* b) {
  for (long m : {4096L, 65536L}) {
    b->Args({m, 0, 1});
    for (long t : {1L, 2L, 4L}) b->Args({m, 1, t});
  }
  b->ArgNames({"n", "parallel", "threads"});
  b->UseRealTime();  // CPU time only counts the calling thread
}

}  // namespace

BENCHMARK(BM_Splat)->Apply(args);
BENCHMARK(BM_SplatBackward)->Apply(args);
BENCHMARK(BM_Sample)->Apply(args);
BENCHMARK(BM_Dense)->Apply(args);

BENCHMARK_MAIN();
