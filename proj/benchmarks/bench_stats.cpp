#include <benchmark/benchmark.h>

#include "gazelab/stats.hpp"

using namespace gazelab;

namespace {

void BM_MixedAnova(benchmark::State& state) {
    const auto panel = gaussian_null_panel(static_cast<int>(state.range(0)), 4, 7);
    for (auto _ : state) benchmark::DoNotOptimize(mixed_anova(panel, 0).group.p);
}
BENCHMARK(BM_MixedAnova)->Arg(5)->Arg(50);

void BM_PowerSampleSize(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(power_sample_size(1.0, 4.0, 0.05, 0.8));
}
BENCHMARK(BM_PowerSampleSize);

}  // namespace
