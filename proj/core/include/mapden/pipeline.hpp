#ifndef MAPDEN_PIPELINE_HPP
#define MAPDEN_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mapden/metrics.hpp"
#include "mapden/noise.hpp"
#include "mapden/vae.hpp"

namespace mapden {

/// One declarative document covering every stage default. The canonical JSON
/// dump (sorted keys) feeds the config hash stamped on all run artifacts.
struct PipelineConfig {
    std::size_t n_patients = 42;
    std::size_t beats_per_patient = 136;
    double test_fraction = 0.25;
    std::uint64_t seed = 1234;

    NoisePlan noise_plan = default_plan();
    VaeConfig vae;

    std::size_t filter_order = 5;
    double filter_low_hz = 0.5;
    double filter_high_hz = 220.0;

    bool psnr_as_printed = false;
    std::string plot_beat_id; // empty: first test beat

    nlohmann::json to_json() const;
    /// Rejects unknown keys at every level.
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::string& path);

    /// FNV-1a 64 digest of the canonical JSON document, 16 hex chars.
    std::string hash() const;
};

struct PipelineArtifacts {
    std::string clean_csv;
    std::string paired_csv;
    std::string ep_library_csv;
    std::string checkpoint;
    std::string train_log_csv;
    std::string denoised_csv;
    std::string filtered_csv;
    std::string report_json;
    std::string report_csv;
    std::string plot_csv;
    std::string manifest_json;
    EvalReport report;
};

/// synth -> extract EP -> corrupt -> train -> denoise -> filter -> eval.
/// Every artifact is stamped with the config hash; with skip_train an
/// existing checkpoint is loaded and its stamp verified.
PipelineArtifacts run_pipeline(const PipelineConfig& config, const std::string& out_dir,
                               bool skip_train = false);

/// Stamp agreement check used by the eval CLI (--force skips it).
void check_same_hash(const std::vector<const Dataset*>& sets, bool force);

} // namespace mapden

#endif
