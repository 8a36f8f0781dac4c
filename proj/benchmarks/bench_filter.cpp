#include <benchmark/benchmark.h>

#include "mapden/butterworth.hpp"
#include "mapden/synth.hpp"

using namespace mapden;

namespace {

void BM_DesignButterworth(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            design_butterworth(5, {0.5, 220.0}, FilterKind::bandpass));
    }
}
BENCHMARK(BM_DesignButterworth);

void BM_FiltFilt(benchmark::State& state) {
    const ButterworthDesign d = design_butterworth(5, {40.0}, FilterKind::lowpass);
    const Beat beat = synth_beat(MapParams{});
    for (auto _ : state) {
        benchmark::DoNotOptimize(filtfilt(d, beat));
    }
}
BENCHMARK(BM_FiltFilt);

void BM_ClinicalFilter(benchmark::State& state) {
    const ButterworthDesign d = baseline_filter_design();
    const Beat beat = synth_beat(MapParams{});
    for (auto _ : state) {
        benchmark::DoNotOptimize(clinical_filter(d, beat));
    }
}
BENCHMARK(BM_ClinicalFilter);

} // namespace
