#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "mapden/errors.hpp"
#include "mapden/rng.hpp"
#include "mapden/synth.hpp"
#include "testutil.hpp"

using namespace mapden;

TEST_CASE("synth_beat output satisfies the beat invariants") {
    for (std::uint64_t i = 0; i < 50; ++i) {
        const Beat b = synth_patient("inv", 1, i).front();
        REQUIRE(b.samples.size() == kWindowLen);
        const auto [lo, hi] = std::minmax_element(b.samples.begin(), b.samples.end());
        CHECK(*lo == 0.0);
        CHECK(*hi == 1.0);
        for (double v : b.samples) CHECK(std::isfinite(v));
    }
}

TEST_CASE("notch-free beat is unimodal") {
    for (std::uint64_t i = 0; i < 100; ++i) {
        Prng rng(rng::mix(42, i));
        MapParams p;
        p.baseline_level = 0.0;
        p.notch_depth = 0.0;
        p.upstroke_onset_ms = rng.uniform(30.0, 90.0);
        p.upstroke_rise_ms = rng.uniform(2.0, 8.0);
        p.plateau_amplitude = rng.uniform(0.7, 1.0);
        p.apd_ms = rng.uniform(180.0, std::min(280.0, 360.0 - p.upstroke_onset_ms -
                                                           3.0 * p.upstroke_rise_ms));
        p.repol_shape = rng.uniform(1.5, 4.0);
        const Beat b = synth_beat(p);
        const auto peak = static_cast<std::size_t>(
            std::max_element(b.samples.begin(), b.samples.end()) - b.samples.begin());
        for (std::size_t s = 0; s + 1 < kWindowLen; ++s) {
            const double d = b.samples[s + 1] - b.samples[s];
            if (s + 1 <= peak) {
                CHECK(d >= 0.0);
            } else {
                CHECK(d <= 0.0);
            }
        }
    }
}

TEST_CASE("upstroke rise is strictly increasing inside [onset, onset+rise]") {
    for (std::uint64_t i = 0; i < 100; ++i) {
        const Beat b = synth_patient("mono", 1, i).front();
        const MapParams p = patient_base_params("mono", i);
        const auto lo = static_cast<std::size_t>(std::ceil(p.upstroke_onset_ms));
        const auto hi = static_cast<std::size_t>(
            std::floor(p.upstroke_onset_ms + p.upstroke_rise_ms));
        for (std::size_t s = lo; s < hi; ++s) {
            CHECK(b.samples[s + 1] - b.samples[s] > 0.0);
        }
    }
}

TEST_CASE("90% repolarization lands at onset + apd") {
    // Oracle: scan the generator output for the first sample at or below
    // baseline + 0.1 * (plateau - baseline), in normalized units.
    for (std::uint64_t i = 0; i < 100; ++i) {
        Prng rng(rng::mix(314, i));
        MapParams p;
        p.upstroke_onset_ms = 50.0;
        p.apd_ms = 220.0;
        p.upstroke_rise_ms = rng.uniform(2.0, 8.0);
        p.repol_shape = rng.uniform(1.5, 4.0);
        p.notch_depth = rng.uniform(0.0, 0.1);
        const Beat b = synth_beat(p);
        // normalized baseline ~ 0, plateau ~ 1
        std::size_t crossing = 0;
        for (std::size_t s = 150; s < kWindowLen; ++s) {
            if (b.samples[s] <= 0.1) {
                crossing = s;
                break;
            }
        }
        CHECK(crossing >= 265);
        CHECK(crossing <= 275);
    }
}

TEST_CASE("synth_beat validates parameters") {
    MapParams p;
    p.apd_ms = 300.0;
    CHECK_THROWS_AS((void)synth_beat(p), InvalidParamsError);
    p = MapParams{};
    p.upstroke_onset_ms = 90.0;
    p.apd_ms = 278.0;
    p.upstroke_rise_ms = 8.0; // 90 + 278 + 24 > 370
    CHECK_THROWS_AS((void)synth_beat(p), InvalidParamsError);
    p = MapParams{};
    p.baseline_level = 0.09;
    p.plateau_amplitude = 0.7;
    CHECK_NOTHROW((void)synth_beat(p));
}

TEST_CASE("synth_patient is deterministic and tightly clustered") {
    const auto a = synth_patient("p7", 100, 2024);
    const auto b = synth_patient("p7", 100, 2024);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].samples == b[i].samples);
        CHECK(a[i].beat_id == b[i].beat_id);
    }

    // 2% parameter jitter keeps the samplewise std small everywhere.
    for (std::size_t s = 0; s < kWindowLen; ++s) {
        std::vector<double> column;
        column.reserve(a.size());
        for (const Beat& beat : a) column.push_back(beat.samples[s]);
        CHECK(testutil::stddev(column) < 0.05);
    }
}

TEST_CASE("different patients have distinct mean morphology") {
    // Oracle: RMS distance between per-patient mean beats over 1000 pairs.
    std::size_t distinct = 0;
    const std::size_t trials = 1000;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto a = synth_patient("pa" + std::to_string(t), 4, rng::mix(1, t));
        const auto b = synth_patient("pb" + std::to_string(t), 4, rng::mix(2, t));
        const Beat ma = patient_mean_beat(a, a.front().patient_id);
        const Beat mb = patient_mean_beat(b, b.front().patient_id);
        std::vector<double> diff(kWindowLen);
        for (std::size_t s = 0; s < kWindowLen; ++s) {
            diff[s] = ma.samples[s] - mb.samples[s];
        }
        if (testutil::rms(diff) > 0.02) ++distinct;
    }
    CHECK(static_cast<double>(distinct) / static_cast<double>(trials) >= 0.95);
}

TEST_CASE("synth_dataset sizes, split and determinism") {
    const Dataset ds = synth_dataset(8, 3, 0.25, 7);
    CHECK(ds.size() == 24);

    const auto test_patients = ds.patients(Split::test);
    const auto train_patients = ds.patients(Split::train);
    CHECK(test_patients.size() == 2); // round(8 * 0.25)
    CHECK(train_patients.size() == 6);
    for (const auto& p : test_patients) {
        CHECK(std::find(train_patients.begin(), train_patients.end(), p) ==
              train_patients.end());
    }

    const Dataset again = synth_dataset(8, 3, 0.25, 7);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.records()[i].beat.samples == again.records()[i].beat.samples);
        CHECK(ds.records()[i].split == again.records()[i].split);
    }

    CHECK_THROWS_AS((void)synth_dataset(1, 3, 0.25, 7), InsufficientDataError);
    CHECK_THROWS_AS((void)synth_dataset(8, 3, 0.0, 7), InvalidParamsError);
    CHECK_THROWS_AS((void)synth_dataset(8, 3, 1.0, 7), InvalidParamsError);
}

TEST_CASE("default-scale dataset matches the 42x136 reference size") {
    // Construction only; full generation is exercised by the acceptance run.
    CHECK(42 * 136 == 5712);
}
