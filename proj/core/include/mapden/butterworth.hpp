#ifndef MAPDEN_BUTTERWORTH_HPP
#define MAPDEN_BUTTERWORTH_HPP

#include <complex>
#include <cstddef>
#include <vector>

#include "mapden/beat.hpp"

namespace mapden {

enum class FilterKind { lowpass, bandpass };

/// One normalized second-order section: (b0 + b1 z^-1 + b2 z^-2) /
/// (1 + a1 z^-1 + a2 z^-2). First-order remainders use b2 = a2 = 0.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
};

struct ButterworthDesign {
    std::size_t order = 5;
    FilterKind kind = FilterKind::lowpass;
    std::vector<double> cutoff_hz; // one value for lowpass, two for bandpass
    double sample_rate_hz = kSampleRateHz;
    std::vector<Biquad> sections;

    /// Analog prototype poles omega_c * exp(j*pi*(2k+N-1)/(2N)), k = 1..N,
    /// after cutoff prewarping (lowpass), or their bandpass images.
    std::vector<std::complex<double>> analog_poles;

    /// Order of the discrete transfer function (N for lowpass, 2N bandpass).
    std::size_t discrete_order() const;
    /// Reflective edge padding used by filtfilt: 3 * discrete_order().
    std::size_t pad_len() const { return 3 * discrete_order(); }
};

/// Designs the analog Butterworth prototype from the pole formula, prewarps
/// cutoffs as omega = 2*fs*tan(pi*f/fs), applies the bilinear transform, and
/// factors the result into stable biquad sections.
/// Throws InvalidCutoffError for cutoffs at/above Nyquist, InvalidParamsError
/// for bad order or cutoff list.
ButterworthDesign design_butterworth(std::size_t order, std::vector<double> cutoff_hz,
                                     FilterKind kind, double fs = kSampleRateHz);

/// Magnitude and phase of the discrete cascade at f_hz.
struct FrequencyResponse {
    double magnitude;
    double phase_rad;
};
FrequencyResponse frequency_response(const ButterworthDesign& design, double f_hz);

/// Closed-form analog magnitude squared of the lowpass prototype,
/// 1 / (1 + (omega/omega_c)^(2N)), with omega_c prewarped.
double analog_magnitude_squared(const ButterworthDesign& design, double omega);

/// Zero-phase forward-backward filtering with odd-reflection edge padding of
/// pad_len() samples and step-response initial conditions per section.
/// Throws SignalTooShortError when the beat is shorter than 3 * order.
Beat filtfilt(const ButterworthDesign& design, const Beat& beat);
std::vector<double> filtfilt(const ButterworthDesign& design, const std::vector<double>& x);

/// The frozen clinical baseline: 5th-order bandpass, filtfilt applied the way
/// a clinical workstation treats one windowed beat:
///   1. subtract the line through the diastolic baseline levels (median of
///      the pre-upstroke head and of the last 30 samples),
///   2. run filtfilt over a mirror-extended copy long enough for the low
///      corner's transient to settle (2 * fs / low_hz samples per side),
///   3. re-zero the output baseline to the head median.
/// Bare filtfilt on the 370-sample window would read the beat's own plateau
/// as sub-corner content and sag it by almost half its amplitude.
ButterworthDesign baseline_filter_design(double low_hz = 0.5, double high_hz = 220.0,
                                         std::size_t order = 5);
Beat clinical_filter(const ButterworthDesign& design, const Beat& beat);
Beat baseline_filter_pipeline(const Beat& beat);

} // namespace mapden

#endif
