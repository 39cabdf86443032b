#include <benchmark/benchmark.h>

#include "gazelab/metrics.hpp"
#include "gazelab/rng.hpp"

using namespace gazelab;

namespace {

GazeTrajectory random_trajectory(rng::Stream& rs, std::size_t n, int size) {
    GazeTrajectory t;
    t.case_id = "c";
    t.width = t.height = size;
    for (std::size_t i = 0; i < n; ++i)
        t.samples.push_back({static_cast<std::int64_t>(i) * 33, rs.uniform(0.0, size), rs.uniform(0.0, size)});
    t.display_end_ms = static_cast<std::int64_t>(n) * 33;
    return t;
}

void BM_Dtw(benchmark::State& state) {
    rng::Stream rs(1);
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_trajectory(rs, n, 512), b = random_trajectory(rs, n, 512);
    for (auto _ : state) benchmark::DoNotOptimize(dtw_distance(a, b));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Dtw)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oNSquared);

void BM_Heterogeneity(benchmark::State& state) {
    rng::Stream rs(2);
    std::vector<GazeTrajectory> v;
    for (int i = 0; i < 9; ++i) v.push_back(random_trajectory(rs, 300, 512));
    for (auto _ : state) benchmark::DoNotOptimize(heterogeneity(v).mean);
}
BENCHMARK(BM_Heterogeneity);

void BM_Coverage(benchmark::State& state) {
    rng::Stream rs(3);
    const int size = static_cast<int>(state.range(0));
    const auto t = random_trajectory(rs, 900, size);
    const Bitmap mask(size, size, true);
    const double r = default_foveal_radius(size);
    for (auto _ : state) benchmark::DoNotOptimize(covered_lung_pixels(t, mask, r));
}
BENCHMARK(BM_Coverage)->Arg(256)->Arg(1024);

void BM_Heatmap(benchmark::State& state) {
    rng::Stream rs(4);
    std::vector<GazeTrajectory> v;
    for (int i = 0; i < 18; ++i) v.push_back(random_trajectory(rs, 900, 1024));
    const auto cfg = default_heatmap_config(1024, 1024, default_foveal_radius(1024));
    for (auto _ : state) benchmark::DoNotOptimize(build_heatmap(v, cfg).cells.data());
}
BENCHMARK(BM_Heatmap);

}  // namespace
