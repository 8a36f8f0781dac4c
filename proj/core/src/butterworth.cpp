#include "mapden/butterworth.hpp"

#include <algorithm>
#include <cmath>

#include "mapden/errors.hpp"

namespace mapden {

namespace {

using cplx = std::complex<double>;

double prewarp(double f_hz, double fs) { return 2.0 * fs * std::tan(M_PI * f_hz / fs); }

cplx bilinear(cplx s, double fs) {
    const double fs2 = 2.0 * fs;
    return (fs2 + s) / (fs2 - s);
}

/// Prototype poles on the unit circle: exp(j*pi*(2k+N-1)/(2N)), k = 1..N.
std::vector<cplx> prototype_poles(std::size_t order) {
    std::vector<cplx> poles;
    const double n = static_cast<double>(order);
    for (std::size_t k = 1; k <= order; ++k) {
        const double angle = M_PI * (2.0 * static_cast<double>(k) + n - 1.0) / (2.0 * n);
        poles.emplace_back(std::cos(angle), std::sin(angle));
    }
    return poles;
}

struct PoleGroup {
    // Either a conjugate pair (p, conj(p)) or one/two real poles.
    std::vector<cplx> poles;
};

Biquad section_from_poles(const PoleGroup& g) {
    Biquad s;
    if (g.poles.size() == 1) {
        s.a1 = -g.poles[0].real();
        s.a2 = 0.0;
    } else {
        const cplx sum = g.poles[0] + g.poles[1];
        const cplx prod = g.poles[0] * g.poles[1];
        s.a1 = -sum.real();
        s.a2 = prod.real();
    }
    return s;
}

} // namespace

std::size_t ButterworthDesign::discrete_order() const {
    return kind == FilterKind::lowpass ? order : 2 * order;
}

ButterworthDesign design_butterworth(std::size_t order, std::vector<double> cutoff_hz,
                                     FilterKind kind, double fs) {
    if (order < 1 || order > 10) {
        throw InvalidParamsError("butterworth order must be in [1, 10]");
    }
    const std::size_t want = kind == FilterKind::lowpass ? 1 : 2;
    if (cutoff_hz.size() != want) {
        throw InvalidParamsError("expected " + std::to_string(want) + " cutoff(s), got " +
                                 std::to_string(cutoff_hz.size()));
    }
    for (double f : cutoff_hz) {
        if (!(f > 0.0) || f >= fs / 2.0) {
            throw InvalidCutoffError(std::to_string(f) + " Hz not in (0, Nyquist)");
        }
    }
    if (kind == FilterKind::bandpass && !(cutoff_hz[0] < cutoff_hz[1])) {
        throw InvalidCutoffError("bandpass needs low < high");
    }

    ButterworthDesign d;
    d.order = order;
    d.kind = kind;
    d.cutoff_hz = std::move(cutoff_hz);
    d.sample_rate_hz = fs;

    const std::vector<cplx> proto = prototype_poles(order);

    // Analog poles grouped so that each group becomes one stable biquad.
    std::vector<PoleGroup> groups;
    double gain_analog = 1.0;
    std::size_t zeros_at_plus1 = 0; // images of s = 0 (bandpass only)

    if (kind == FilterKind::lowpass) {
        const double wc = prewarp(d.cutoff_hz[0], fs);
        for (std::size_t k = 0; k + 1 < order - k; ++k) {
            groups.push_back({{wc * proto[k], wc * proto[order - 1 - k]}});
        }
        if (order % 2 == 1) {
            groups.push_back({{wc * proto[order / 2]}});
        }
        gain_analog = std::pow(wc, static_cast<double>(order));
    } else {
        const double wl = prewarp(d.cutoff_hz[0], fs);
        const double wh = prewarp(d.cutoff_hz[1], fs);
        const double bw = wh - wl;
        const double w0_sq = wl * wh;
        // Each prototype pole p maps to the roots of s^2 - p*bw*s + w0^2.
        const auto split = [bw, w0_sq](cplx p) {
            const cplx half = 0.5 * p * bw;
            const cplx root = std::sqrt(half * half - w0_sq);
            return std::pair<cplx, cplx>(half + root, half - root);
        };
        for (std::size_t k = 0; k + 1 < order - k; ++k) {
            const auto [ap, am] = split(proto[k]);
            const auto [bp, bm] = split(proto[order - 1 - k]);
            groups.push_back({{ap, bp}}); // conjugates of each other
            groups.push_back({{am, bm}});
        }
        if (order % 2 == 1) {
            const auto [sp, sm] = split(proto[order / 2]);
            groups.push_back({{sp, sm}});
        }
        gain_analog = std::pow(bw, static_cast<double>(order));
        zeros_at_plus1 = order;
    }

    for (const PoleGroup& g : groups) {
        for (const cplx& p : g.poles) {
            if (!(p.real() < 0.0)) {
                throw Error(ErrorKind::numerical, "analog pole not in the left half-plane");
            }
            d.analog_poles.push_back(p);
        }
    }

    // Bilinear transform: k_d = k_a * prod(fs2 - z_a) / prod(fs2 - p_a).
    const double fs2 = 2.0 * fs;
    cplx denom(1.0, 0.0);
    for (const cplx& p : d.analog_poles) denom *= (fs2 - p);
    const double num = std::pow(fs2, static_cast<double>(zeros_at_plus1));
    const double gain_digital = gain_analog * (num / denom).real();

    // Zeros: bandpass has `order` at z=+1 (from s=0) plus `order` at z=-1
    // from the degree excess; lowpass has `order` at z=-1.
    std::size_t minus_ones = order;
    std::size_t plus_ones = zeros_at_plus1;

    for (const PoleGroup& g : groups) {
        std::vector<cplx> zpoles;
        for (const cplx& p : g.poles) {
            cplx q = bilinear(p, fs);
            if (!(std::abs(q) < 1.0)) {
                throw Error(ErrorKind::numerical, "discrete pole on or outside the unit circle");
            }
            zpoles.push_back(q);
        }
        Biquad s = section_from_poles(PoleGroup{zpoles});

        // Each section hosts as many zeros as poles; bandpass sections get
        // one z=+1 and one z=-1 ([1,0,-1]), lowpass sections only z=-1.
        const std::size_t capacity = zpoles.size();
        std::size_t take_plus = std::min<std::size_t>(plus_ones, 1);
        std::size_t take_minus = std::min(minus_ones, capacity - take_plus);
        take_plus += std::min(plus_ones - take_plus, capacity - take_plus - take_minus);
        plus_ones -= take_plus;
        minus_ones -= take_minus;

        double poly[3] = {1.0, 0.0, 0.0};
        std::size_t deg = 0;
        const auto mul_root = [&poly, &deg](double root) {
            // multiply the b polynomial by (1 - root * z^-1)
            double next[3] = {0.0, 0.0, 0.0};
            for (std::size_t i = 0; i <= deg; ++i) {
                next[i] += poly[i];
                next[i + 1] -= root * poly[i];
            }
            ++deg;
            for (int i = 0; i < 3; ++i) poly[i] = next[i];
        };
        for (std::size_t i = 0; i < take_plus; ++i) mul_root(1.0);
        for (std::size_t i = 0; i < take_minus; ++i) mul_root(-1.0);
        s.b0 = poly[0];
        s.b1 = poly[1];
        s.b2 = poly[2];
        d.sections.push_back(s);
    }

    // Fold the overall gain into the first section.
    d.sections.front().b0 *= gain_digital;
    d.sections.front().b1 *= gain_digital;
    d.sections.front().b2 *= gain_digital;
    return d;
}

FrequencyResponse frequency_response(const ButterworthDesign& design, double f_hz) {
    if (f_hz < 0.0 || f_hz >= design.sample_rate_hz / 2.0) {
        throw InvalidParamsError("frequency must be in [0, Nyquist)");
    }
    const double theta = 2.0 * M_PI * f_hz / design.sample_rate_hz;
    const cplx z1 = std::polar(1.0, -theta); // z^-1
    const cplx z2 = z1 * z1;
    cplx h(1.0, 0.0);
    for (const Biquad& s : design.sections) {
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    }
    return {std::abs(h), std::arg(h)};
}

double analog_magnitude_squared(const ButterworthDesign& design, double omega) {
    const double n2 = 2.0 * static_cast<double>(design.order);
    if (design.kind == FilterKind::lowpass) {
        const double wc = prewarp(design.cutoff_hz[0], design.sample_rate_hz);
        return 1.0 / (1.0 + std::pow(omega / wc, n2));
    }
    const double wl = prewarp(design.cutoff_hz[0], design.sample_rate_hz);
    const double wh = prewarp(design.cutoff_hz[1], design.sample_rate_hz);
    const double bw = wh - wl;
    const double w0_sq = wl * wh;
    if (omega == 0.0) return 0.0;
    const double x = (omega * omega - w0_sq) / (bw * omega);
    return 1.0 / (1.0 + std::pow(std::abs(x), n2));
}

namespace {

// Direct form II transposed with explicit initial state.
void filter_section(const Biquad& s, std::vector<double>& x) {
    // Step-response steady state for unit input, scaled by the first sample:
    // removes the startup transient for signals with a DC-ish leading edge.
    const double denom = 1.0 + s.a1 + s.a2;
    const double g = denom != 0.0 ? (s.b0 + s.b1 + s.b2) / denom : 0.0;
    const double x0 = x.empty() ? 0.0 : x.front();
    double s2 = (s.b2 - s.a2 * g) * x0;
    double s1 = (s.b1 - s.a1 * g) * x0 + s2;

    for (double& v : x) {
        const double in = v;
        const double out = s.b0 * in + s1;
        s1 = s.b1 * in - s.a1 * out + s2;
        s2 = s.b2 * in - s.a2 * out;
        v = out;
    }
}

void filter_cascade(const ButterworthDesign& d, std::vector<double>& x) {
    for (const Biquad& s : d.sections) filter_section(s, x);
}

} // namespace

std::vector<double> filtfilt(const ButterworthDesign& design, const std::vector<double>& x) {
    const std::size_t pad = design.pad_len();
    if (x.size() < 3 * design.order || x.size() <= pad) {
        throw SignalTooShortError("filtfilt needs more than " + std::to_string(pad) +
                                  " samples, got " + std::to_string(x.size()));
    }
    const std::size_t n = x.size();
    std::vector<double> ext(n + 2 * pad);
    // Odd reflection around both endpoints.
    for (std::size_t i = 0; i < pad; ++i) {
        ext[i] = 2.0 * x.front() - x[pad - i];
        ext[pad + n + i] = 2.0 * x.back() - x[n - 2 - i];
    }
    std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));

    filter_cascade(design, ext);
    std::reverse(ext.begin(), ext.end());
    filter_cascade(design, ext);
    std::reverse(ext.begin(), ext.end());

    return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

Beat filtfilt(const ButterworthDesign& design, const Beat& beat) {
    Beat out = beat;
    out.samples = filtfilt(design, beat.samples);
    return out;
}

ButterworthDesign baseline_filter_design(double low_hz, double high_hz, std::size_t order) {
    return design_butterworth(order, {low_hz, high_hz}, FilterKind::bandpass);
}

namespace {

double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1, v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

} // namespace

Beat clinical_filter(const ButterworthDesign& design, const Beat& beat) {
    const std::size_t n = beat.samples.size();
    if (n < 40) {
        throw SignalTooShortError("clinical filter needs >= 40 samples, got " +
                                  std::to_string(n));
    }
    const std::size_t upstroke = upstroke_index(beat);
    const std::size_t head_len = std::max<std::size_t>(10, upstroke > 5 ? upstroke - 5 : 10);
    const std::size_t head = std::min(head_len, n - 1);

    const double head_level = median_of(
        {beat.samples.begin(), beat.samples.begin() + static_cast<std::ptrdiff_t>(head)});
    const double tail_level =
        median_of({beat.samples.end() - 30, beat.samples.end()});

    std::vector<double> detrended(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n - 1);
        detrended[i] = beat.samples[i] - (head_level + (tail_level - head_level) * t);
    }

    // Mirror extension: the windowed beat becomes a same-sign beat train whose
    // harmonics clear the low corner, so the passband keeps the morphology.
    const auto settle = static_cast<std::size_t>(
        std::ceil(2.0 * design.sample_rate_hz / std::max(design.cutoff_hz[0], 0.05)));
    const std::size_t total = n + 2 * settle;
    std::vector<double> ext(total);
    const auto period = static_cast<std::ptrdiff_t>(2 * n);
    for (std::size_t j = 0; j < total; ++j) {
        std::ptrdiff_t rel = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(settle);
        rel = ((rel % period) + period) % period;
        const auto idx = static_cast<std::size_t>(rel);
        ext[j] = detrended[idx < n ? idx : 2 * n - 1 - idx];
    }

    const std::vector<double> filtered_ext = filtfilt(design, ext);
    std::vector<double> out(filtered_ext.begin() + static_cast<std::ptrdiff_t>(settle),
                            filtered_ext.begin() + static_cast<std::ptrdiff_t>(settle + n));

    const double base = median_of(
        {out.begin(), out.begin() + static_cast<std::ptrdiff_t>(head)});
    for (double& v : out) v -= base;

    Beat result = beat;
    result.samples = std::move(out);
    return result;
}

Beat baseline_filter_pipeline(const Beat& beat) {
    static const ButterworthDesign design = baseline_filter_design();
    return clinical_filter(design, beat);
}

} // namespace mapden
