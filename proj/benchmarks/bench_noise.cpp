#include <benchmark/benchmark.h>

#include "mapden/noise.hpp"
#include "mapden/synth.hpp"

using namespace mapden;

namespace {

void BM_GaussianNoise(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(gaussian_noise(kWindowLen, 0.01, seed++));
    }
}
BENCHMARK(BM_GaussianNoise);

void BM_CorruptDefaultPlan(benchmark::State& state) {
    Dataset ds = synth_dataset(4, 8, 0.25, 1);
    const EpNoiseLibrary lib = extract_ep_library(ds);
    const Beat& beat = ds.records().front().beat;
    std::uint64_t n = 0;
    for (auto _ : state) {
        const NoisePlan plan =
            instantiate_plan(default_plan(), 9, "b" + std::to_string(n++));
        benchmark::DoNotOptimize(corrupt(beat, plan, &lib));
    }
}
BENCHMARK(BM_CorruptDefaultPlan);

void BM_SynthBeat(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(synth_patient("bench", 1, seed++));
    }
}
BENCHMARK(BM_SynthBeat);

} // namespace

BENCHMARK_MAIN();
