#include <benchmark/benchmark.h>

#include <cmath>

#include "epower/gemm.hpp"
#include "epower/model.hpp"
#include "epower/patterns.hpp"
#include "epower/telemetry.hpp"

using namespace epower;
using patterns::Family;
using patterns::ValueMode;

static void BM_ReferenceGemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = patterns::generate({Family::baseline_random, n, 0, ValueMode::independent, 1});
  patterns::Matrix c(n, 0.0);
  for (auto _ : state) {
    gemm::reference_gemm(p.a, p.b, c, 1.0, 1.0);
    benchmark::DoNotOptimize(c.values().data());
  }
  state.counters["flop/s"] = benchmark::Counter(2.0 * static_cast<double>(n * n * n),
                                                benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_ReferenceGemm)->RangeMultiplier(2)->Range(64, 512)->Unit(benchmark::kMillisecond);

static void BM_GeneratePattern(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto p = patterns::generate({Family::block_diagonal, n, 3, ValueMode::independent, 7});
    benchmark::DoNotOptimize(p.a.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n));
}
BENCHMARK(BM_GeneratePattern)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_ToggleScore(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto lanes = static_cast<std::size_t>(state.range(1));
  const auto p = patterns::generate({Family::block_rowcol, n, 3, ValueMode::fixed_common, 0});
  for (auto _ : state) {
    auto r = model::score_pattern(p, model::Schedule{lanes, 1, 1});
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_ToggleScore)->Args({64, 1})->Args({64, 4})->Args({128, 4})->Unit(benchmark::kMillisecond);

static void BM_TimelineRoundTrip(benchmark::State& state) {
  telemetry::Timeline tl("gpu", 100.0, 1662026400000);
  for (int i = 0; i < 36000; ++i) tl.append({i * 100.0, 300.0 + 90.0 * std::sin(i * 0.01), "gpu"});
  for (auto _ : state) {
    auto back = telemetry::parse_timeline(telemetry::format_timeline(tl));
    benchmark::DoNotOptimize(back);
  }
  state.SetItemsProcessed(state.iterations() * 36000);
}
BENCHMARK(BM_TimelineRoundTrip)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
