#ifndef MAPDEN_SYNTH_HPP
#define MAPDEN_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mapden/beat.hpp"
#include "mapden/dataset.hpp"

namespace mapden {

/// Morphology parameters for one synthetic beat. Times are in ms (== samples
/// at 1 kHz), voltages in arbitrary pre-normalization units.
struct MapParams {
    double baseline_level = 0.02;    // [0, 0.1]
    double upstroke_onset_ms = 60.0; // [30, 90]
    double upstroke_rise_ms = 4.0;   // [2, 8], 10-90% rise width
    double plateau_amplitude = 0.85; // [0.7, 1.0], > baseline_level
    double apd_ms = 230.0;           // [180, 280], time to 90% repolarization
    double repol_shape = 2.5;        // [1.5, 4.0], repolarization sigmoid steepness
    double notch_depth = 0.03;       // [0, 0.1], relative post-upstroke dip

    /// Throws InvalidParamsError when a field is out of range or the beat
    /// would not complete inside the 370 ms window.
    void validate() const;
};

/// Deterministic beat synthesis: flat baseline, sigmoidal upstroke, optional
/// notch, slowly decaying plateau, sigmoidal repolarization placed so the
/// 90%-repolarized time equals onset + apd. Output is min-max normalized.
Beat synth_beat(const MapParams& params);

/// Evaluates the pre-normalization morphology at time t_ms. Exposed so tests
/// can solve the waveform analytically.
double map_waveform(const MapParams& params, double t_ms);

/// One base parameter draw for the patient plus <= 2% relative per-beat
/// jitter. Deterministic in (patient_id, seed).
std::vector<Beat> synth_patient(const std::string& patient_id, std::size_t n_beats,
                                std::uint64_t seed);

/// Base parameters synth_patient would draw, before per-beat jitter.
MapParams patient_base_params(const std::string& patient_id, std::uint64_t seed);

/// Clean dataset of n_patients x beats_per_patient beats with a BY-PATIENT
/// train/test split: round(n_patients * test_fraction) test patients, at
/// least 1, at most n_patients - 1.
Dataset synth_dataset(std::size_t n_patients, std::size_t beats_per_patient,
                      double test_fraction, std::uint64_t seed);

} // namespace mapden

#endif
