#include "mapden/beat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mapden/errors.hpp"

namespace mapden {

namespace {

void require_finite(const Beat& beat, const char* op) {
    for (double v : beat.samples) {
        if (!std::isfinite(v)) {
            throw NonFiniteError(std::string(op) + " on beat " + beat.beat_id);
        }
    }
}

// Pairwise (cascade) summation over an index range of pre-sorted columns.
double pairwise_sum(const std::vector<const Beat*>& beats, std::size_t sample,
                    std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return beats[lo]->samples[sample];
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(beats, sample, lo, mid) + pairwise_sum(beats, sample, mid, hi);
}

} // namespace

std::pair<Beat, NormParams> normalize(const Beat& beat) {
    require_finite(beat, "normalize");
    if (beat.samples.size() < 2) {
        throw DegenerateSignalError("normalize needs >= 2 samples, got " +
                                    std::to_string(beat.samples.size()));
    }
    const auto [min_it, max_it] = std::minmax_element(beat.samples.begin(), beat.samples.end());
    const double lo = *min_it;
    const double hi = *max_it;
    if (hi == lo) {
        throw DegenerateSignalError("constant signal in beat " + beat.beat_id);
    }
    Beat out = beat;
    const double scale = hi - lo;
    for (double& v : out.samples) v = (v - lo) / scale;
    return {std::move(out), NormParams{lo, scale}};
}

Beat denormalize(const Beat& beat, const NormParams& params) {
    if (!(params.scale > 0.0)) {
        throw InvalidParamsError("denormalize scale must be > 0, got " +
                                 std::to_string(params.scale));
    }
    Beat out = beat;
    for (double& v : out.samples) v = v * params.scale + params.offset;
    return out;
}

Beat patient_mean_beat(const std::vector<Beat>& beats, const std::string& patient_id) {
    std::vector<const Beat*> own;
    for (const Beat& b : beats) {
        if (b.patient_id == patient_id) own.push_back(&b);
    }
    if (own.size() < 2) {
        throw InsufficientDataError("patient " + patient_id + " has " +
                                    std::to_string(own.size()) + " beats, need >= 2");
    }
    for (const Beat* b : own) {
        if (b->samples.size() != kWindowLen) {
            throw ShapeError("beat " + b->beat_id + " has length " +
                             std::to_string(b->samples.size()) + ", expected " +
                             std::to_string(kWindowLen));
        }
    }
    std::sort(own.begin(), own.end(),
              [](const Beat* a, const Beat* b) { return a->beat_id < b->beat_id; });

    Beat mean;
    mean.patient_id = patient_id;
    mean.beat_id = patient_id + "_mean";
    mean.samples.resize(kWindowLen);
    const double n = static_cast<double>(own.size());
    for (std::size_t s = 0; s < kWindowLen; ++s) {
        mean.samples[s] = pairwise_sum(own, s, 0, own.size()) / n;
    }
    return mean;
}

std::size_t upstroke_index(const Beat& beat) {
    require_finite(beat, "upstroke_index");
    if (beat.samples.size() < 2) {
        throw DegenerateSignalError("upstroke_index needs >= 2 samples");
    }
    std::size_t best = 0;
    double best_diff = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < beat.samples.size(); ++i) {
        const double d = beat.samples[i + 1] - beat.samples[i];
        if (d > best_diff) {
            best_diff = d;
            best = i;
        }
    }
    return best;
}

} // namespace mapden
