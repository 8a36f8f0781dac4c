#include "mapden/synth.hpp"

#include <algorithm>
#include <cmath>

#include "mapden/errors.hpp"
#include "mapden/rng.hpp"

namespace mapden {

namespace {

// Plateau decay constants: a gentle linear sag plus an exponential droop.
// Kept well away from the repolarization scale so the waveform stays unimodal
// over the whole legal parameter box.
constexpr double kLinearSag = 0.06;
constexpr double kExpSag = 0.10;
constexpr double kExpTauMs = 130.0;

// 10-90% width of a logistic is ln(81) ~= 4.394 times its scale.
constexpr double kLogistic1090 = 4.39444915467244;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double plateau_decay(const MapParams& p, double t_ms) {
    const double dt = std::max(0.0, t_ms - p.upstroke_onset_ms);
    return 1.0 - kLinearSag * dt / static_cast<double>(kWindowLen) -
           kExpSag * (1.0 - std::exp(-dt / kExpTauMs));
}

double repol_width(const MapParams& p) { return p.apd_ms / (10.0 * p.repol_shape); }

// Center of the repolarization sigmoid, placed so that the relative height
// up*decay*repol crosses 0.1 exactly at onset + apd. The upstroke sigmoid is
// saturated there, so the crossing condition reduces to a closed form.
double repol_center(const MapParams& p) {
    const double t90 = p.upstroke_onset_ms + p.apd_ms;
    const double level = 0.1 / plateau_decay(p, t90);
    return t90 - repol_width(p) * std::log((1.0 - level) / level);
}

struct ParamRange {
    double lo;
    double hi;
};

constexpr ParamRange kBaselineRange{0.0, 0.1};
constexpr ParamRange kOnsetRange{30.0, 90.0};
constexpr ParamRange kRiseRange{2.0, 8.0};
constexpr ParamRange kPlateauRange{0.7, 1.0};
constexpr ParamRange kApdRange{180.0, 280.0};
constexpr ParamRange kRepolRange{1.5, 4.0};
constexpr ParamRange kNotchRange{0.0, 0.1};

// Base draws respect this slack so a 2% jitter cannot push
// onset + apd + 3*rise past the window.
constexpr double kTimingBudgetMs = 362.0;

double jittered(Prng& rng, double value, const ParamRange& range, double frac = 0.02) {
    const double v = value * (1.0 + rng.uniform(-frac, frac));
    return std::clamp(v, range.lo, range.hi);
}

// Truncated normal by rejection; the draw sequence is deterministic in rng.
double truncated_normal(Prng& rng, double mean, double sd, double lo, double hi) {
    for (;;) {
        const double v = rng.normal(mean, sd);
        if (v >= lo && v <= hi) return v;
    }
}

} // namespace

void MapParams::validate() const {
    const auto in = [](double v, const ParamRange& r) { return v >= r.lo && v <= r.hi; };
    if (!in(baseline_level, kBaselineRange) || !in(upstroke_onset_ms, kOnsetRange) ||
        !in(upstroke_rise_ms, kRiseRange) || !in(plateau_amplitude, kPlateauRange) ||
        !in(apd_ms, kApdRange) || !in(repol_shape, kRepolRange) ||
        !in(notch_depth, kNotchRange)) {
        throw InvalidParamsError("MapParams field out of range");
    }
    if (!(upstroke_onset_ms + apd_ms + 3.0 * upstroke_rise_ms < kWindowLen)) {
        throw InvalidParamsError("beat does not complete inside the window");
    }
    if (!(plateau_amplitude > baseline_level)) {
        throw InvalidParamsError("plateau_amplitude must exceed baseline_level");
    }
}

double map_waveform(const MapParams& p, double t_ms) {
    const double w_up = p.upstroke_rise_ms / kLogistic1090;
    const double up = logistic((t_ms - p.upstroke_onset_ms) / w_up);
    const double rep = logistic(-(t_ms - repol_center(p)) / repol_width(p));
    const double height = up * plateau_decay(p, t_ms) * rep;

    // Small dip after the upstroke has fully completed; kept narrow so it
    // cannot cancel the rise inside [onset, onset + rise].
    const double notch_center = p.upstroke_onset_ms + 3.0 * p.upstroke_rise_ms;
    const double notch_sigma = 2.0 + 0.5 * p.upstroke_rise_ms;
    const double dt_n = (t_ms - notch_center) / notch_sigma;
    const double notch = p.notch_depth * std::exp(-0.5 * dt_n * dt_n) * up;

    return p.baseline_level +
           (p.plateau_amplitude - p.baseline_level) * (height - notch * height);
}

Beat synth_beat(const MapParams& params) {
    params.validate();
    Beat raw;
    raw.samples.resize(kWindowLen);
    for (std::size_t i = 0; i < kWindowLen; ++i) {
        raw.samples[i] = map_waveform(params, static_cast<double>(i));
    }
    auto [normalized, norm] = normalize(raw);
    (void)norm;
    return normalized;
}

MapParams patient_base_params(const std::string& patient_id, std::uint64_t seed) {
    // A single-disease cohort of aligned beats: morphologies cluster around a
    // canonical MAP, so base parameters are truncated normals inside the
    // legal ranges rather than uniform over them. Mean beats of two patients
    // still differ by > 0.02 RMS essentially always.
    Prng rng(rng::mix(seed, rng::fnv1a(patient_id)));
    MapParams p;
    p.baseline_level = truncated_normal(rng, 0.04, 0.02, kBaselineRange.lo, kBaselineRange.hi);
    p.upstroke_onset_ms = truncated_normal(rng, 60.0, 6.0, kOnsetRange.lo, kOnsetRange.hi);
    p.upstroke_rise_ms = truncated_normal(rng, 4.5, 1.2, kRiseRange.lo, kRiseRange.hi);
    p.plateau_amplitude =
        truncated_normal(rng, 0.85, 0.06, kPlateauRange.lo, kPlateauRange.hi);
    const double apd_hi = std::min(
        kApdRange.hi, kTimingBudgetMs - p.upstroke_onset_ms - 3.0 * p.upstroke_rise_ms);
    p.apd_ms = truncated_normal(rng, 230.0, 18.0, kApdRange.lo, apd_hi);
    p.repol_shape = truncated_normal(rng, 2.5, 0.5, kRepolRange.lo, kRepolRange.hi);
    p.notch_depth = truncated_normal(rng, 0.04, 0.025, kNotchRange.lo, kNotchRange.hi);
    p.validate();
    return p;
}

std::vector<Beat> synth_patient(const std::string& patient_id, std::size_t n_beats,
                                std::uint64_t seed) {
    if (n_beats < 1) {
        throw InvalidParamsError("n_beats must be >= 1");
    }
    const MapParams base = patient_base_params(patient_id, seed);
    Prng rng(rng::mix(rng::mix(seed, rng::fnv1a(patient_id)), 1));

    std::vector<Beat> beats;
    beats.reserve(n_beats);
    for (std::size_t i = 0; i < n_beats; ++i) {
        // Timing parameters get a tighter jitter: the windows arrive aligned,
        // and a steep upstroke turns small time shifts into large samplewise
        // deviations.
        MapParams p;
        p.baseline_level = jittered(rng, base.baseline_level, kBaselineRange);
        p.upstroke_onset_ms = jittered(rng, base.upstroke_onset_ms, kOnsetRange, 0.002);
        p.upstroke_rise_ms = jittered(rng, base.upstroke_rise_ms, kRiseRange);
        p.plateau_amplitude = jittered(rng, base.plateau_amplitude, kPlateauRange);
        p.apd_ms = jittered(rng, base.apd_ms, kApdRange, 0.005);
        p.repol_shape = jittered(rng, base.repol_shape, kRepolRange);
        p.notch_depth = jittered(rng, base.notch_depth, kNotchRange);

        Beat b = synth_beat(p);
        std::string index = std::to_string(i);
        index.insert(0, index.size() < 4 ? 4 - index.size() : 0, '0');
        b.beat_id = patient_id + "_b" + index;
        b.patient_id = patient_id;
        beats.push_back(std::move(b));
    }
    return beats;
}

Dataset synth_dataset(std::size_t n_patients, std::size_t beats_per_patient,
                      double test_fraction, std::uint64_t seed) {
    if (n_patients < 2) {
        throw InsufficientDataError("need >= 2 patients for a patient-level split");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw InvalidParamsError("test_fraction must be in (0, 1)");
    }
    if (beats_per_patient < 1) {
        throw InvalidParamsError("beats_per_patient must be >= 1");
    }

    const auto n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(static_cast<double>(n_patients) * test_fraction)),
        1, n_patients - 1);

    std::vector<std::size_t> order(n_patients);
    for (std::size_t i = 0; i < n_patients; ++i) order[i] = i;
    Prng split_rng(rng::mix(seed, 0x5174EEDULL));
    split_rng.shuffle(order);
    std::vector<bool> is_test(n_patients, false);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

    std::size_t width = 1;
    for (std::size_t v = n_patients - 1; v >= 10; v /= 10) ++width;

    Dataset ds;
    for (std::size_t i = 0; i < n_patients; ++i) {
        std::string index = std::to_string(i);
        index.insert(0, index.size() < width ? width - index.size() : 0, '0');
        const std::string pid = "p" + index;
        const Split split = is_test[i] ? Split::test : Split::train;
        for (Beat& b : synth_patient(pid, beats_per_patient, rng::mix(seed, i))) {
            ds.push_back(Record{std::move(b), split, Role::clean});
        }
    }
    ds.validate();
    return ds;
}

} // namespace mapden
