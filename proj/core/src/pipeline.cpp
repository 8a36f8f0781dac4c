#include "mapden/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mapden/butterworth.hpp"
#include "mapden/synth.hpp"

namespace mapden {

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json j;
    j["dataset"] = {{"n_patients", n_patients},
                    {"beats_per_patient", beats_per_patient},
                    {"test_fraction", test_fraction}};
    j["seed"] = seed;
    j["noise_plan"] = plan_to_json(noise_plan);
    j["vae"] = vae.to_json();
    j["filter"] = {{"order", filter_order}, {"low_hz", filter_low_hz}, {"high_hz", filter_high_hz}};
    j["psnr_as_printed"] = psnr_as_printed;
    j["plot_beat_id"] = plot_beat_id;
    return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "dataset") {
            for (const auto& [k2, v2] : value.items()) {
                if (k2 == "n_patients") v2.get_to(c.n_patients);
                else if (k2 == "beats_per_patient") v2.get_to(c.beats_per_patient);
                else if (k2 == "test_fraction") v2.get_to(c.test_fraction);
                else throw InvalidParamsError("unknown dataset key '" + k2 + "'");
            }
        } else if (key == "seed") {
            value.get_to(c.seed);
        } else if (key == "noise_plan") {
            c.noise_plan = plan_from_json(value);
        } else if (key == "vae") {
            c.vae = VaeConfig::from_json(value);
        } else if (key == "filter") {
            for (const auto& [k2, v2] : value.items()) {
                if (k2 == "order") v2.get_to(c.filter_order);
                else if (k2 == "low_hz") v2.get_to(c.filter_low_hz);
                else if (k2 == "high_hz") v2.get_to(c.filter_high_hz);
                else throw InvalidParamsError("unknown filter key '" + k2 + "'");
            }
        } else if (key == "psnr_as_printed") {
            value.get_to(c.psnr_as_printed);
        } else if (key == "plot_beat_id") {
            value.get_to(c.plot_beat_id);
        } else {
            throw InvalidParamsError("unknown config key '" + key + "'");
        }
    }
    c.vae.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::config, "cannot open config '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParamsError("config JSON: " + std::string(e.what()));
    }
    return from_json(j);
}

std::string PipelineConfig::hash() const {
    const std::uint64_t h = rng::fnv1a(to_json().dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("stage ") + stage + ": " + e.what());
    }
}

} // namespace

void check_same_hash(const std::vector<const Dataset*>& sets, bool force) {
    if (force) return;
    std::string expected;
    for (const Dataset* ds : sets) {
        if (!ds->config_hash()) continue;
        if (expected.empty()) {
            expected = *ds->config_hash();
        } else if (*ds->config_hash() != expected) {
            throw AlignmentError("artifacts carry differing config hashes (" + expected +
                                 " vs " + *ds->config_hash() + "); use --force to override");
        }
    }
}

PipelineArtifacts run_pipeline(const PipelineConfig& config, const std::string& out_dir,
                               bool skip_train) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string hash = config.hash();
    const auto path = [&out_dir](const char* name) { return out_dir + "/" + name; };

    PipelineArtifacts art;
    art.clean_csv = path("dataset_clean.csv");
    art.paired_csv = path("dataset_paired.csv");
    art.ep_library_csv = path("ep_library.csv");
    art.checkpoint = path("model.ckpt");
    art.train_log_csv = path("train_log.csv");
    art.denoised_csv = path("denoised.csv");
    art.filtered_csv = path("filtered.csv");
    art.report_json = path("report.json");
    art.report_csv = path("report.csv");
    art.plot_csv = path("plot_beat.csv");
    art.manifest_json = path("run_manifest.json");

    // synth
    Dataset clean = run_stage("synth", [&] {
        Dataset ds = synth_dataset(config.n_patients, config.beats_per_patient,
                                   config.test_fraction, config.seed);
        ds.set_config_hash(hash);
        write_dataset(ds, art.clean_csv);
        return ds;
    });

    // EP extraction + corruption
    const bool plan_has_ep = std::any_of(
        config.noise_plan.begin(), config.noise_plan.end(),
        [](const NoiseSpec& s) { return std::holds_alternative<EpSpec>(s.params); });

    EpNoiseLibrary library;
    if (plan_has_ep) {
        library = run_stage("extract-noise", [&] {
            EpNoiseLibrary lib = extract_ep_library(clean);
            write_ep_library(lib, art.ep_library_csv);
            return lib;
        });
    }

    Dataset paired = run_stage("corrupt", [&] {
        Dataset ds;
        for (const Record& r : clean.records()) {
            ds.push_back(r);
            const NoisePlan beat_plan =
                instantiate_plan(config.noise_plan, config.seed, r.beat.beat_id);
            Record noisy{corrupt(r.beat, beat_plan, plan_has_ep ? &library : nullptr),
                         r.split, Role::noisy};
            ds.push_back(std::move(noisy));
        }
        ds.set_config_hash(hash);
        write_dataset(ds, art.paired_csv);
        return ds;
    });

    // train (or load)
    VaeModel model = run_stage("train", [&] {
        if (skip_train) {
            auto [loaded, stamp] = load_checkpoint(art.checkpoint, &config.vae);
            if (stamp != hash) {
                throw CheckpointError("checkpoint stamp " + stamp +
                                      " does not match config hash " + hash);
            }
            return std::move(loaded);
        }
        VaeModel m = VaeModel::init(config.vae);
        const TrainingReport report = train(m, paired, [](const EpochLog& log) {
            std::fprintf(stderr, "epoch %zu %s: neg_elbo %.4f recon %.4f kl %.4f\n",
                         log.epoch, log.split.c_str(), log.neg_elbo, log.recon_term,
                         log.kl_term);
        });
        write_train_log(report, art.train_log_csv);
        save_checkpoint(m, art.checkpoint, hash);
        return m;
    });

    // denoise + filter every noisy beat
    std::vector<Beat> noisy_beats;
    std::vector<Split> splits;
    for (const Record& r : paired.records()) {
        if (r.role == Role::noisy) {
            noisy_beats.push_back(r.beat);
            splits.push_back(r.split);
        }
    }

    Dataset denoised = run_stage("denoise", [&] {
        Dataset ds;
        std::vector<Beat> outputs = denoise_batch(model, noisy_beats);
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            ds.push_back(Record{std::move(outputs[i]), splits[i], Role::clean});
        }
        ds.set_config_hash(hash);
        write_dataset(ds, art.denoised_csv);
        return ds;
    });

    Dataset filtered = run_stage("filter", [&] {
        const ButterworthDesign design = design_butterworth(
            config.filter_order, {config.filter_low_hz, config.filter_high_hz},
            FilterKind::bandpass);
        Dataset ds;
        for (std::size_t i = 0; i < noisy_beats.size(); ++i) {
            ds.push_back(Record{clinical_filter(design, noisy_beats[i]), splits[i], Role::clean});
        }
        ds.set_config_hash(hash);
        write_dataset(ds, art.filtered_csv);
        return ds;
    });

    // evaluate
    run_stage("eval", [&] {
        Dataset noisy_ds;
        for (std::size_t i = 0; i < noisy_beats.size(); ++i) {
            noisy_ds.push_back(Record{noisy_beats[i], splits[i], Role::noisy});
        }
        noisy_ds.set_config_hash(hash);
        art.report = evaluate(clean, noisy_ds, filtered, denoised, config.psnr_as_printed);
        art.report.config_hash = hash;
        art.report.noise_plan_desc = plan_to_json(config.noise_plan).dump();
        emit_report(art.report, art.report_json, art.report_csv);

        std::string plot_id = config.plot_beat_id;
        if (plot_id.empty()) {
            for (const Record& r : clean.records()) {
                if (r.split == Split::test) {
                    plot_id = r.beat.beat_id;
                    break;
                }
            }
            if (plot_id.empty()) plot_id = clean.records().front().beat.beat_id;
        }
        emit_plot_data(clean, noisy_ds, filtered, denoised, plot_id, art.plot_csv);
        return 0;
    });

    nlohmann::json manifest;
    manifest["config"] = config.to_json();
    manifest["config_hash"] = hash;
    manifest["artifacts"] = {art.clean_csv,    art.paired_csv,  art.ep_library_csv,
                             art.checkpoint,   art.train_log_csv, art.denoised_csv,
                             art.filtered_csv, art.report_json, art.report_csv,
                             art.plot_csv};
    std::ofstream mf(art.manifest_json, std::ios::binary);
    mf << manifest.dump(2) << '\n';
    return art;
}

} // namespace mapden
