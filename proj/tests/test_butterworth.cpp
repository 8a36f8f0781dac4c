#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <set>

#include "mapden/butterworth.hpp"
#include "mapden/errors.hpp"
#include "mapden/metrics.hpp"
#include "mapden/noise.hpp"
#include "mapden/synth.hpp"
#include "testutil.hpp"

using namespace mapden;

namespace {

// Oracle: discrete poles as roots of each section denominator.
std::vector<std::complex<double>> discrete_poles(const ButterworthDesign& d) {
    std::vector<std::complex<double>> out;
    for (const Biquad& s : d.sections) {
        if (s.a2 == 0.0) {
            out.emplace_back(-s.a1, 0.0);
            continue;
        }
        const std::complex<double> disc =
            std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
        out.push_back((-s.a1 + disc) / 2.0);
        out.push_back((-s.a1 - disc) / 2.0);
    }
    return out;
}

std::vector<double> impulse_response(const ButterworthDesign& d, std::size_t n) {
    std::vector<double> x(n, 0.0);
    x[0] = 1.0;
    // run the cascade with zero initial state
    for (const Biquad& s : d.sections) {
        double s1 = 0, s2 = 0;
        for (double& v : x) {
            const double in = v;
            const double out = s.b0 * in + s1;
            s1 = s.b1 * in - s.a1 * out + s2;
            s2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return x;
}

} // namespace

TEST_CASE("prototype pole placement follows the analog formula") {
    // order 1: single pole at -omega_c
    const ButterworthDesign d1 = design_butterworth(1, {40.0}, FilterKind::lowpass);
    REQUIRE(d1.analog_poles.size() == 1);
    const double wc = 2.0 * 1000.0 * std::tan(M_PI * 40.0 / 1000.0);
    CHECK(d1.analog_poles[0].real() == doctest::Approx(-wc).epsilon(1e-12));
    CHECK(d1.analog_poles[0].imag() == doctest::Approx(0.0));

    // order 5: angles {108, 144, 180, 216, 252} degrees
    const ButterworthDesign d5 = design_butterworth(5, {40.0}, FilterKind::lowpass);
    REQUIRE(d5.analog_poles.size() == 5);
    std::multiset<int> angles;
    for (const auto& p : d5.analog_poles) {
        CHECK(std::abs(p) == doctest::Approx(wc).epsilon(1e-12));
        CHECK(p.real() < 0.0);
        double deg = std::arg(p) * 180.0 / M_PI;
        if (deg < 0) deg += 360.0;
        angles.insert(static_cast<int>(std::lround(deg)));
    }
    CHECK(angles == std::multiset<int>{108, 144, 180, 216, 252});
}

TEST_CASE("all discrete poles are strictly inside the unit circle") {
    for (const ButterworthDesign& d :
         {design_butterworth(5, {40.0}, FilterKind::lowpass),
          design_butterworth(5, {0.5, 120.0}, FilterKind::bandpass),
          design_butterworth(2, {100.0}, FilterKind::lowpass),
          design_butterworth(7, {10.0, 200.0}, FilterKind::bandpass)}) {
        for (const auto& p : discrete_poles(d)) {
            CHECK(std::abs(p) < 1.0);
        }
    }
}

TEST_CASE("cutoff validation") {
    CHECK_THROWS_AS((void)design_butterworth(5, {500.0}, FilterKind::lowpass),
                    InvalidCutoffError);
    CHECK_THROWS_AS((void)design_butterworth(5, {600.0}, FilterKind::lowpass),
                    InvalidCutoffError);
    CHECK_THROWS_AS((void)design_butterworth(5, {-1.0}, FilterKind::lowpass),
                    InvalidCutoffError);
    CHECK_THROWS_AS((void)design_butterworth(5, {120.0, 0.5}, FilterKind::bandpass),
                    InvalidCutoffError);
    CHECK_THROWS_AS((void)design_butterworth(0, {40.0}, FilterKind::lowpass),
                    InvalidParamsError);
    CHECK_THROWS_AS((void)design_butterworth(11, {40.0}, FilterKind::lowpass),
                    InvalidParamsError);
    CHECK_THROWS_AS((void)design_butterworth(5, {40.0, 80.0}, FilterKind::lowpass),
                    InvalidParamsError);
}

TEST_CASE("frequency response: DC gain, -3 dB point, analog identity") {
    const ButterworthDesign d = design_butterworth(5, {40.0}, FilterKind::lowpass);

    CHECK(frequency_response(d, 0.0).magnitude == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(frequency_response(d, 40.0).magnitude ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-3));

    // Bilinear identity: |H_d(f)| == |H_a(j * 2 fs tan(pi f / fs))|.
    for (double f = 1.0; f < 499.0; f += 7.3) {
        const double omega = 2.0 * 1000.0 * std::tan(M_PI * f / 1000.0);
        const double mag2 = analog_magnitude_squared(d, omega);
        const double got = frequency_response(d, f).magnitude;
        CHECK(got * got == doctest::Approx(mag2).epsilon(1e-9));
    }

    // closed-form analog magnitude on a grid
    const double wc = 2.0 * 1000.0 * std::tan(M_PI * 40.0 / 1000.0);
    for (double omega = 1.0; omega < 6000.0; omega += 97.0) {
        CHECK(analog_magnitude_squared(d, omega) ==
              doctest::Approx(1.0 / (1.0 + std::pow(omega / wc, 10.0))).epsilon(1e-9));
    }
}

TEST_CASE("lowpass magnitude is strictly decreasing") {
    // Below ~2 Hz the decrement of a 40 Hz order-5 response is ~1e-17 of 1.0,
    // beneath double resolution, so the strict grid starts at 2 Hz.
    const ButterworthDesign d = design_butterworth(5, {40.0}, FilterKind::lowpass);
    double prev = frequency_response(d, 2.0).magnitude;
    CHECK(prev <= 1.0);
    for (int i = 1; i < 1000; ++i) {
        const double f = 2.0 + (498.9 - 2.0) * static_cast<double>(i) / 1000.0;
        const double mag = frequency_response(d, f).magnitude;
        CHECK(mag < prev);
        prev = mag;
    }
}

TEST_CASE("impulse response energy dies off") {
    const ButterworthDesign lp = design_butterworth(5, {40.0}, FilterKind::lowpass);
    const auto h = impulse_response(lp, 4000);
    double total = 0, tail = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        total += h[i] * h[i];
        if (i >= 1000) tail += h[i] * h[i];
    }
    CHECK(tail / total < 1e-8);

    // The 0.5 Hz bandpass edge rings for ~1 s; its energy must still vanish
    // over a longer horizon.
    const ButterworthDesign bp = design_butterworth(5, {0.5, 120.0}, FilterKind::bandpass);
    const auto hb = impulse_response(bp, 40000);
    double total_b = 0, tail_b = 0;
    for (std::size_t i = 0; i < hb.size(); ++i) {
        total_b += hb[i] * hb[i];
        if (i >= 20000) tail_b += hb[i] * hb[i];
    }
    CHECK(tail_b / total_b < 1e-8);
}

TEST_CASE("filtfilt: DC passthrough, zero phase, linearity") {
    const ButterworthDesign d = design_butterworth(5, {40.0}, FilterKind::lowpass);

    std::vector<double> dc(370, 0.73);
    const auto dc_out = filtfilt(d, dc);
    for (double v : dc_out) CHECK(v == doctest::Approx(0.73).epsilon(1e-6));

    // symmetric input -> symmetric output
    std::vector<double> sym(370);
    for (std::size_t i = 0; i < sym.size(); ++i) {
        const double t = (static_cast<double>(i) - 184.5) / 40.0;
        sym[i] = std::exp(-t * t);
    }
    const auto sym_out = filtfilt(d, sym);
    for (std::size_t i = 0; i < sym.size(); ++i) {
        CHECK(sym_out[i] ==
              doctest::Approx(sym_out[369 - i]).epsilon(1e-9));
    }

    // linearity
    Prng rng(31);
    std::vector<double> x(370), y(370), mix(370);
    for (std::size_t i = 0; i < 370; ++i) {
        x[i] = rng.uniform(-1, 1);
        y[i] = rng.uniform(-1, 1);
        mix[i] = 2.5 * x[i] - 1.25 * y[i];
    }
    const auto fx = filtfilt(d, x);
    const auto fy = filtfilt(d, y);
    const auto fmix = filtfilt(d, mix);
    for (std::size_t i = 0; i < 370; ++i) {
        CHECK(fmix[i] == doctest::Approx(2.5 * fx[i] - 1.25 * fy[i]).epsilon(1e-9));
    }

    std::vector<double> tiny(10, 1.0);
    CHECK_THROWS_AS((void)filtfilt(d, tiny), SignalTooShortError);
}

TEST_CASE("filtfilt attenuation matches the analog oracle") {
    const ButterworthDesign d = design_butterworth(5, {40.0}, FilterKind::lowpass);

    // 50 Hz sinusoid through a 40 Hz lowpass: double-pass |H|^2 ~ 0.095
    std::vector<double> tone(370);
    for (std::size_t i = 0; i < tone.size(); ++i) {
        tone[i] = std::sin(2.0 * M_PI * 50.0 * static_cast<double>(i) / 1000.0);
    }
    const auto out = filtfilt(d, tone);
    CHECK(testutil::rms(out) < 0.25 * testutil::rms(tone));

    // 5 Hz passes essentially untouched
    std::vector<double> slow(370);
    for (std::size_t i = 0; i < slow.size(); ++i) {
        slow[i] = std::sin(2.0 * M_PI * 5.0 * static_cast<double>(i) / 1000.0);
    }
    const auto slow_out = filtfilt(d, slow);
    std::vector<double> diff(370);
    for (std::size_t i = 0; i < 370; ++i) diff[i] = slow_out[i] - slow[i];
    CHECK(testutil::rms(diff) < 0.02 * testutil::rms(slow));
}

TEST_CASE("clinical baseline pipeline behavior") {
    // Thresholds frozen from a 24-beat corpus measurement: the wander bound
    // holds at corpus level (single draws can have tiny RMS), the others per
    // beat.
    std::vector<Beat> corpus;
    for (std::uint64_t i = 0; i < 4; ++i) {
        for (Beat& b : synth_patient("flt" + std::to_string(i), 6, i)) {
            corpus.push_back(std::move(b));
        }
    }

    double wander_in_sum = 0.0, wander_out_sum = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Beat& clean = corpus[i];

        const Beat through = baseline_filter_pipeline(clean);
        CHECK(pcc(through.samples, clean.samples) > 0.99);

        NoisePlan wander_plan;
        wander_plan.push_back(NoiseSpec{WanderSpec{0.05, 3, 0.01, 0.3}, 1000 + i, 0});
        const Beat wandered = corrupt(clean, wander_plan);
        const Beat fixed = baseline_filter_pipeline(wandered);
        wander_in_sum += rmse(wandered.samples, clean.samples);
        wander_out_sum += rmse(fixed.samples, clean.samples);

        NoisePlan spike_plan;
        spike_plan.push_back(NoiseSpec{SpikeSpec{0.1, 0.3, 2}, 2000 + i, 0});
        const Beat spiked = corrupt(clean, spike_plan);
        const Beat despiked = baseline_filter_pipeline(spiked);
        CHECK(rmse(despiked.samples, clean.samples) >
              0.5 * rmse(spiked.samples, clean.samples));
    }
    CHECK(wander_out_sum < 0.4 * wander_in_sum);
}
