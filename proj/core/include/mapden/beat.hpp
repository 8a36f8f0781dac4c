#ifndef MAPDEN_BEAT_HPP
#define MAPDEN_BEAT_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace mapden {

/// Fixed analysis window: 370 samples at 1 kHz. Every module rejects other
/// lengths because the VAE flatten dimension is derived from it.
inline constexpr std::size_t kWindowLen = 370;
inline constexpr double kSampleRateHz = 1000.0;

/// One aligned voltage window. Values are in normalized units once
/// normalize() has been applied; corrupted beats may exceed [0,1].
struct Beat {
    std::vector<double> samples;
    double sample_rate_hz = kSampleRateHz;
    std::string patient_id;
    std::string beat_id;
};

struct NormParams {
    double offset = 0.0;
    double scale = 1.0;
};

/// Min-max normalization to exactly [0, 1].
/// Throws DegenerateSignalError when the signal is constant.
std::pair<Beat, NormParams> normalize(const Beat& beat);

/// Inverse of normalize: samples * scale + offset.
/// Throws InvalidParamsError when scale <= 0.
Beat denormalize(const Beat& beat, const NormParams& params);

/// Samplewise mean over this patient's beats, accumulated pairwise in
/// sorted-beat_id order so the result is independent of input order.
/// Throws InsufficientDataError with fewer than 2 beats for the patient.
Beat patient_mean_beat(const std::vector<Beat>& beats, const std::string& patient_id);

/// Index of the steepest rise: argmax over i of samples[i+1] - samples[i],
/// ties broken toward the smallest index.
std::size_t upstroke_index(const Beat& beat);

} // namespace mapden

#endif
