#include "mapden/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "mapden/errors.hpp"
#include "mapden/rng.hpp"

namespace mapden {

Series gaussian_noise(std::size_t len, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) {
        throw InvalidParamsError("gaussian sigma must be >= 0");
    }
    Series out(len, 0.0);
    if (sigma == 0.0) return out;
    Prng rng(seed);
    for (double& v : out) v = sigma * rng.normal();
    return out;
}

std::vector<WanderComponent> draw_wander_components(std::size_t n_components, double amplitude,
                                                    double f_low, double f_high,
                                                    std::uint64_t seed) {
    if (!(f_low > 0.0 && f_low < f_high)) {
        throw InvalidParamsError("wander requires 0 < f_low < f_high");
    }
    if (amplitude < 0.0) {
        throw InvalidParamsError("wander amplitude must be >= 0");
    }
    if (n_components < 1) {
        throw InvalidParamsError("wander needs >= 1 component");
    }
    Prng rng(seed);
    std::vector<WanderComponent> comps(n_components);
    for (auto& c : comps) {
        c.freq_hz = rng.uniform(f_low, f_high);
        c.phase_rad = rng.uniform(0.0, 2.0 * M_PI);
        c.amplitude = amplitude / static_cast<double>(n_components);
    }
    return comps;
}

Series baseline_wander(std::size_t len, double amplitude, std::size_t n_components,
                       double f_low, double f_high, std::uint64_t seed) {
    const auto comps = draw_wander_components(n_components, amplitude, f_low, f_high, seed);
    Series out(len, 0.0);
    if (amplitude == 0.0) return out;
    for (std::size_t i = 0; i < len; ++i) {
        const double t = static_cast<double>(i) / kSampleRateHz;
        double v = 0.0;
        for (const auto& c : comps) {
            v += c.amplitude * std::sin(2.0 * M_PI * c.freq_hz * t + c.phase_rad);
        }
        out[i] = v;
    }
    return out;
}

Series powerline(std::size_t len, double amplitude, std::uint64_t seed, double freq_hz) {
    if (amplitude < 0.0 || freq_hz <= 0.0 || freq_hz >= kSampleRateHz / 2.0) {
        throw InvalidParamsError("powerline amplitude >= 0 and 0 < freq < Nyquist required");
    }
    Series out(len, 0.0);
    if (amplitude == 0.0) return out;
    Prng rng(seed);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);

    // With an integer samples-per-cycle count, index the cycle position so the
    // output is bit-exactly periodic (50 Hz at 1 kHz -> every 20 samples).
    const double period = kSampleRateHz / freq_hz;
    const auto int_period = static_cast<std::size_t>(period);
    const bool integer_period = period == static_cast<double>(int_period);
    for (std::size_t i = 0; i < len; ++i) {
        const double cycles = integer_period
                                  ? static_cast<double>(i % int_period) / period
                                  : freq_hz * static_cast<double>(i) / kSampleRateHz;
        out[i] = amplitude * std::sin(2.0 * M_PI * cycles + phase);
    }
    return out;
}

Series spikes(const Beat& beat, double amp_lo, double amp_hi, std::size_t n_spikes,
              std::uint64_t seed) {
    if (n_spikes < 1) {
        throw InvalidParamsError("n_spikes must be >= 1");
    }
    if (!(amp_lo >= 0.0 && amp_lo <= amp_hi)) {
        throw InvalidParamsError("spike amplitude range must satisfy 0 <= lo <= hi");
    }
    const std::size_t upstroke = upstroke_index(beat);
    if (upstroke == 0) {
        throw NoPreUpstrokeRegionError("beat " + beat.beat_id + " rises at index 0");
    }
    if (upstroke < n_spikes) {
        throw InvalidParamsError("not enough pre-upstroke samples for " +
                                 std::to_string(n_spikes) + " spikes");
    }
    Prng rng(seed);
    std::vector<std::size_t> slots(upstroke);
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    // Partial Fisher-Yates: the first n_spikes entries become the positions.
    for (std::size_t i = 0; i < n_spikes; ++i) {
        const std::size_t j = i + rng.below(slots.size() - i);
        std::swap(slots[i], slots[j]);
    }
    Series out(beat.samples.size(), 0.0);
    for (std::size_t i = 0; i < n_spikes; ++i) {
        const double amp = rng.uniform(amp_lo, amp_hi);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        out[slots[i]] = sign * amp;
    }
    return out;
}

Series truncation_mask(std::size_t len, std::size_t keep_start, std::size_t keep_end,
                       std::uint64_t seed) {
    (void)seed; // deterministic by construction; kept for interface symmetry
    if (!(keep_start < keep_end && keep_end <= len)) {
        throw InvalidParamsError("truncation needs 0 <= keep_start < keep_end <= len");
    }
    Series out(len, 0.0);
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(keep_start),
              out.begin() + static_cast<std::ptrdiff_t>(keep_end), 1.0);
    return out;
}

std::size_t EpNoiseLibrary::count_excluding(const std::string& patient_id) const {
    std::size_t n = 0;
    for (const auto& r : residuals) {
        if (r.patient_id != patient_id) ++n;
    }
    return n;
}

EpNoiseLibrary extract_ep_library(const Dataset& dataset) {
    std::map<std::string, std::vector<const Beat*>> by_patient;
    for (const Record& r : dataset.records()) {
        if (r.role == Role::clean) {
            by_patient[r.beat.patient_id].push_back(&r.beat);
        }
    }
    EpNoiseLibrary lib;
    std::vector<Beat> group;
    for (const auto& [patient, beat_ptrs] : by_patient) {
        if (beat_ptrs.size() < 2) continue;
        group.clear();
        for (const Beat* b : beat_ptrs) group.push_back(*b);
        const Beat mean = patient_mean_beat(group, patient);
        for (const Beat* b : beat_ptrs) {
            EpResidual res;
            res.patient_id = patient;
            res.source_beat_id = b->beat_id;
            res.samples.resize(kWindowLen);
            for (std::size_t i = 0; i < kWindowLen; ++i) {
                res.samples[i] = b->samples[i] - mean.samples[i];
            }
            lib.residuals.push_back(std::move(res));
        }
    }
    if (lib.residuals.empty()) {
        throw InsufficientDataError("no patient with >= 2 clean beats");
    }
    return lib;
}

Series ep_noise(const EpNoiseLibrary& library, std::size_t len, double amplitude,
                std::size_t k_mix, std::uint64_t seed, const std::string& exclude_patient) {
    if (amplitude < 0.0) {
        throw InvalidParamsError("ep amplitude must be >= 0");
    }
    if (k_mix < 1) {
        throw InvalidParamsError("k_mix must be >= 1");
    }
    std::vector<const EpResidual*> eligible;
    for (const auto& r : library.residuals) {
        if (r.patient_id != exclude_patient) eligible.push_back(&r);
    }
    if (eligible.size() < k_mix) {
        throw InsufficientDataError("library has " + std::to_string(eligible.size()) +
                                    " residuals outside patient " + exclude_patient +
                                    ", need " + std::to_string(k_mix));
    }
    Series out(len, 0.0);
    if (amplitude == 0.0) return out;

    Prng rng(seed);
    for (std::size_t i = 0; i < k_mix; ++i) {
        const std::size_t j = i + rng.below(eligible.size() - i);
        std::swap(eligible[i], eligible[j]);
    }
    std::vector<double> weights(k_mix);
    double weight_sum = 0.0;
    for (double& w : weights) {
        w = rng.uniform(0.5, 1.5);
        weight_sum += w;
    }
    for (std::size_t i = 0; i < k_mix; ++i) {
        const EpResidual& res = *eligible[i];
        if (res.samples.size() != len) {
            throw ShapeError("residual length " + std::to_string(res.samples.size()) +
                             " vs requested " + std::to_string(len));
        }
        const double w = weights[i] / weight_sum;
        for (std::size_t s = 0; s < len; ++s) out[s] += w * res.samples[s];
    }

    double sq = 0.0;
    for (double v : out) sq += v * v;
    const double rms = std::sqrt(sq / static_cast<double>(len));
    if (rms == 0.0) {
        throw DegenerateSignalError("EP mix has zero RMS, cannot scale");
    }
    const double scale = amplitude / rms;
    for (double& v : out) v *= scale;
    return out;
}

void write_ep_library(const EpNoiseLibrary& library, const std::string& path) {
    Dataset ds;
    for (const auto& r : library.residuals) {
        Record rec;
        rec.beat.samples = r.samples;
        rec.beat.patient_id = r.patient_id;
        rec.beat.beat_id = r.source_beat_id;
        rec.split = Split::train;
        rec.role = Role::clean;
        ds.push_back(std::move(rec));
    }
    write_dataset(ds, path);
}

EpNoiseLibrary read_ep_library(const std::string& path) {
    const Dataset ds = read_dataset(path);
    EpNoiseLibrary lib;
    for (const Record& r : ds.records()) {
        lib.residuals.push_back(EpResidual{r.beat.samples, r.beat.patient_id, r.beat.beat_id});
    }
    return lib;
}

std::string NoiseSpec::kind_name() const {
    return std::visit(
        [](const auto& p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, GaussianSpec>) return "gaussian";
            if constexpr (std::is_same_v<T, WanderSpec>) return "baseline_wander";
            if constexpr (std::is_same_v<T, PowerlineSpec>) return "powerline";
            if constexpr (std::is_same_v<T, SpikeSpec>) return "spike";
            if constexpr (std::is_same_v<T, TruncationSpec>) return "truncation";
            if constexpr (std::is_same_v<T, EpSpec>) return "ep";
        },
        params);
}

NoisePlan default_plan() {
    NoisePlan plan;
    plan.push_back(NoiseSpec{GaussianSpec{0.01}, 0, 1});
    plan.push_back(NoiseSpec{WanderSpec{0.05, 3, 0.01, 0.3}, 0, 2});
    plan.push_back(NoiseSpec{PowerlineSpec{0.02, 50.0}, 0, 3});
    plan.push_back(NoiseSpec{SpikeSpec{0.1, 0.3, 2}, 0, 4});
    plan.push_back(NoiseSpec{EpSpec{0.03, 3}, 0, 5});
    plan.push_back(NoiseSpec{TruncationSpec{5, 365}, 0, 6});
    return plan;
}

void validate_plan(const NoisePlan& plan) {
    std::size_t truncations = 0;
    for (const NoiseSpec& spec : plan) {
        if (std::holds_alternative<TruncationSpec>(spec.params)) ++truncations;
    }
    if (truncations > 1) {
        throw InvalidParamsError("a plan may contain at most one truncation entry");
    }
}

NoisePlan instantiate_plan(const NoisePlan& plan, std::uint64_t global_seed,
                           const std::string& beat_id) {
    NoisePlan out = plan;
    const std::uint64_t beat_hash = rng::fnv1a(beat_id);
    for (NoiseSpec& spec : out) {
        spec.seed = rng::mix(rng::mix(global_seed, spec.seed_offset), beat_hash);
    }
    return out;
}

Beat corrupt(const Beat& beat, const NoisePlan& plan, const EpNoiseLibrary* library) {
    validate_plan(plan);
    const std::size_t len = beat.samples.size();
    Beat out = beat;
    const TruncationSpec* truncation = nullptr;
    std::uint64_t truncation_seed = 0;

    for (const NoiseSpec& spec : plan) {
        if (const auto* t = std::get_if<TruncationSpec>(&spec.params)) {
            truncation = t;
            truncation_seed = spec.seed;
            continue;
        }
        Series add;
        if (const auto* g = std::get_if<GaussianSpec>(&spec.params)) {
            add = gaussian_noise(len, g->sigma, spec.seed);
        } else if (const auto* w = std::get_if<WanderSpec>(&spec.params)) {
            add = baseline_wander(len, w->amplitude, w->n_components, w->f_low, w->f_high,
                                  spec.seed);
        } else if (const auto* p = std::get_if<PowerlineSpec>(&spec.params)) {
            add = powerline(len, p->amplitude, spec.seed, p->freq_hz);
        } else if (const auto* s = std::get_if<SpikeSpec>(&spec.params)) {
            add = spikes(beat, s->amp_lo, s->amp_hi, s->n_spikes, spec.seed);
        } else if (const auto* e = std::get_if<EpSpec>(&spec.params)) {
            if (library == nullptr) {
                throw InvalidParamsError("plan has an EP entry but no library was given");
            }
            add = ep_noise(*library, len, e->amplitude, e->k_mix, spec.seed,
                           beat.patient_id);
        }
        for (std::size_t i = 0; i < len; ++i) out.samples[i] += add[i];
    }

    if (truncation != nullptr) {
        const Series mask =
            truncation_mask(len, truncation->keep_start, truncation->keep_end, truncation_seed);
        for (std::size_t i = 0; i < len; ++i) out.samples[i] *= mask[i];
    }
    for (double& v : out.samples) v = std::clamp(v, -0.5, 1.5);
    return out;
}

NoisePlan plan_from_json(const nlohmann::json& j) {
    if (!j.is_array()) {
        throw InvalidParamsError("plan JSON must be an array");
    }
    NoisePlan plan;
    for (const auto& e : j) {
        const std::string kind = e.at("kind").get<std::string>();
        NoiseSpec spec;
        spec.seed_offset = e.value("seed_offset", static_cast<std::uint64_t>(plan.size() + 1));
        if (kind == "gaussian") {
            GaussianSpec g;
            g.sigma = e.value("amplitude", g.sigma);
            spec.params = g;
        } else if (kind == "baseline_wander") {
            WanderSpec w;
            w.amplitude = e.value("amplitude", w.amplitude);
            w.n_components = e.value("n_components", w.n_components);
            w.f_low = e.value("f_low", w.f_low);
            w.f_high = e.value("f_high", w.f_high);
            spec.params = w;
        } else if (kind == "powerline") {
            PowerlineSpec p;
            p.amplitude = e.value("amplitude", p.amplitude);
            p.freq_hz = e.value("freq_hz", p.freq_hz);
            spec.params = p;
        } else if (kind == "spike") {
            SpikeSpec s;
            s.amp_lo = e.value("amp_lo", s.amp_lo);
            s.amp_hi = e.value("amp_hi", s.amp_hi);
            s.n_spikes = e.value("n_spikes", s.n_spikes);
            spec.params = s;
        } else if (kind == "truncation") {
            TruncationSpec t;
            t.keep_start = e.value("keep_start", t.keep_start);
            t.keep_end = e.value("keep_end", t.keep_end);
            spec.params = t;
        } else if (kind == "ep") {
            EpSpec ep;
            ep.amplitude = e.value("amplitude", ep.amplitude);
            ep.k_mix = e.value("k_mix", ep.k_mix);
            spec.params = ep;
        } else {
            throw InvalidParamsError("unknown noise kind '" + kind + "'");
        }
        plan.push_back(std::move(spec));
    }
    validate_plan(plan);
    return plan;
}

nlohmann::json plan_to_json(const NoisePlan& plan) {
    nlohmann::json arr = nlohmann::json::array();
    for (const NoiseSpec& spec : plan) {
        nlohmann::json e;
        e["kind"] = spec.kind_name();
        e["seed_offset"] = spec.seed_offset;
        std::visit(
            [&e](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, GaussianSpec>) {
                    e["amplitude"] = p.sigma;
                } else if constexpr (std::is_same_v<T, WanderSpec>) {
                    e["amplitude"] = p.amplitude;
                    e["n_components"] = p.n_components;
                    e["f_low"] = p.f_low;
                    e["f_high"] = p.f_high;
                } else if constexpr (std::is_same_v<T, PowerlineSpec>) {
                    e["amplitude"] = p.amplitude;
                    e["freq_hz"] = p.freq_hz;
                } else if constexpr (std::is_same_v<T, SpikeSpec>) {
                    e["amp_lo"] = p.amp_lo;
                    e["amp_hi"] = p.amp_hi;
                    e["n_spikes"] = p.n_spikes;
                } else if constexpr (std::is_same_v<T, TruncationSpec>) {
                    e["keep_start"] = p.keep_start;
                    e["keep_end"] = p.keep_end;
                } else if constexpr (std::is_same_v<T, EpSpec>) {
                    e["amplitude"] = p.amplitude;
                    e["k_mix"] = p.k_mix;
                }
            },
            spec.params);
        arr.push_back(std::move(e));
    }
    return arr;
}

NoisePlan read_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::data, "cannot open plan '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, "plan JSON: " + std::string(e.what()));
    }
    return plan_from_json(j);
}

} // namespace mapden
