#ifndef MAPDEN_NOISE_HPP
#define MAPDEN_NOISE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mapden/beat.hpp"
#include "mapden/dataset.hpp"

namespace mapden {

using Series = std::vector<double>;

// ---------------------------------------------------------------------------
// Noise sources. All generators are pure functions of (params, seed).
// ---------------------------------------------------------------------------

/// I.i.d. zero-mean Gaussian samples with standard deviation sigma.
Series gaussian_noise(std::size_t len, double sigma, std::uint64_t seed);

struct WanderComponent {
    double freq_hz;
    double phase_rad;
    double amplitude;
};

/// Frequencies uniform in [f_low, f_high], phases uniform in [0, 2pi),
/// per-component amplitude = amplitude / n_components.
std::vector<WanderComponent> draw_wander_components(std::size_t n_components, double amplitude,
                                                    double f_low, double f_high,
                                                    std::uint64_t seed);

/// Sum of n_components low-frequency sinusoids (defaults 3 in [0.01, 0.3] Hz).
Series baseline_wander(std::size_t len, double amplitude, std::size_t n_components,
                       double f_low, double f_high, std::uint64_t seed);

/// Mains-interference sinusoid amplitude*sin(2*pi*f*t + phi), phi uniform per
/// seed. When fs/freq is an integer the series is exactly periodic in it.
Series powerline(std::size_t len, double amplitude, std::uint64_t seed,
                 double freq_hz = 50.0);

/// n_spikes single-sample impulses at distinct indices uniform in
/// [0, upstroke_index(beat) - 1], amplitudes uniform in [amp_lo, amp_hi] with
/// random sign.
Series spikes(const Beat& beat, double amp_lo, double amp_hi, std::size_t n_spikes,
              std::uint64_t seed);

/// Multiplicative mask: 1.0 on [keep_start, keep_end), 0.0 elsewhere.
Series truncation_mask(std::size_t len, std::size_t keep_start, std::size_t keep_end,
                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Semi-synthetic EP noise.
// ---------------------------------------------------------------------------

struct EpResidual {
    Series samples;
    std::string patient_id;
    std::string source_beat_id;
};

/// Per-patient deviations from the mean beat, pooled with provenance tags.
struct EpNoiseLibrary {
    std::vector<EpResidual> residuals;

    std::size_t count_excluding(const std::string& patient_id) const;
};

/// residual_i = beat_i - patient_mean_beat for every patient with >= 2 clean
/// beats. Throws InsufficientDataError when no patient qualifies.
EpNoiseLibrary extract_ep_library(const Dataset& dataset);

/// Weighted sum of k_mix residuals drawn without replacement (weights uniform
/// in [0.5, 1.5], renormalized to sum 1), rescaled so its RMS equals
/// amplitude. Residuals from exclude_patient are never used.
Series ep_noise(const EpNoiseLibrary& library, std::size_t len, double amplitude,
                std::size_t k_mix, std::uint64_t seed, const std::string& exclude_patient);

/// Library file I/O reusing the dataset CSV schema (one residual per row).
void write_ep_library(const EpNoiseLibrary& library, const std::string& path);
EpNoiseLibrary read_ep_library(const std::string& path);

// ---------------------------------------------------------------------------
// Corruption plans.
// ---------------------------------------------------------------------------

struct GaussianSpec {
    double sigma = 0.01;
};
struct WanderSpec {
    double amplitude = 0.05;
    std::size_t n_components = 3;
    double f_low = 0.01;
    double f_high = 0.3;
};
struct PowerlineSpec {
    double amplitude = 0.02;
    double freq_hz = 50.0;
};
struct SpikeSpec {
    double amp_lo = 0.1;
    double amp_hi = 0.3;
    std::size_t n_spikes = 2;
};
struct TruncationSpec {
    std::size_t keep_start = 5;
    std::size_t keep_end = 365;
};
struct EpSpec {
    double amplitude = 0.03;
    std::size_t k_mix = 3;
};

/// One corruption source. seed is the fully derived per-beat seed; plans
/// loaded from JSON carry a seed_offset that instantiate_plan() mixes with
/// the global seed and the beat id.
struct NoiseSpec {
    std::variant<GaussianSpec, WanderSpec, PowerlineSpec, SpikeSpec, TruncationSpec, EpSpec>
        params;
    std::uint64_t seed = 0;
    std::uint64_t seed_offset = 0;

    std::string kind_name() const;
};

using NoisePlan = std::vector<NoiseSpec>;

/// The all-six-sources default plan used by the reference pipeline.
NoisePlan default_plan();

/// A plan must contain at most one truncation entry; EP entries need a
/// library at corrupt() time. Throws InvalidParamsError on violation.
void validate_plan(const NoisePlan& plan);

/// Clones the plan with per-beat seeds: mix(global_seed, seed_offset, beat_id).
NoisePlan instantiate_plan(const NoisePlan& plan, std::uint64_t global_seed,
                           const std::string& beat_id);

/// Additive sources summed in plan order, then the optional truncation mask,
/// then a clamp to [-0.5, 1.5].
Beat corrupt(const Beat& beat, const NoisePlan& plan,
             const EpNoiseLibrary* library = nullptr);

/// JSON plan format: array of {"kind": ..., "seed_offset": ..., params...}.
NoisePlan plan_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const NoisePlan& plan);
NoisePlan read_plan(const std::string& path);

} // namespace mapden

#endif
