// mapden: synthesize, corrupt, denoise, filter and evaluate MAP-like cardiac
// beats. One binary, one subcommand per pipeline stage, plus `run` for the
// whole chain.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "mapden/butterworth.hpp"
#include "mapden/errors.hpp"
#include "mapden/metrics.hpp"
#include "mapden/noise.hpp"
#include "mapden/pipeline.hpp"
#include "mapden/synth.hpp"
#include "mapden/vae.hpp"

namespace {

int exit_code(mapden::ErrorKind kind) {
    switch (kind) {
        case mapden::ErrorKind::config: return 2;
        case mapden::ErrorKind::data: return 3;
        case mapden::ErrorKind::numerical: return 4;
    }
    return 1;
}

// Rows to process for denoise/filter: the noisy side of a paired file, or
// everything when the file has no noisy rows.
std::vector<const mapden::Record*> input_rows(const mapden::Dataset& ds) {
    auto noisy = ds.with_role(mapden::Role::noisy);
    if (!noisy.empty()) return noisy;
    return ds.with_role(mapden::Role::clean);
}

void cmd_synth(std::size_t patients, std::size_t beats, double test_fraction,
               std::uint64_t seed, const std::string& out) {
    mapden::Dataset ds = mapden::synth_dataset(patients, beats, test_fraction, seed);
    mapden::write_dataset(ds, out);
    std::cout << "wrote " << ds.size() << " beats to " << out << "\n";
}

void cmd_extract_noise(const std::string& in, const std::string& out) {
    const mapden::Dataset ds = mapden::read_dataset(in);
    const mapden::EpNoiseLibrary lib = mapden::extract_ep_library(ds);
    mapden::write_ep_library(lib, out);
    std::cout << "wrote " << lib.residuals.size() << " residuals to " << out << "\n";
}

void cmd_corrupt(const std::string& in, const std::string& plan_path,
                 const std::string& ep_library, std::uint64_t seed, const std::string& out) {
    const mapden::Dataset clean = mapden::read_dataset(in);
    const mapden::NoisePlan plan =
        plan_path.empty() ? mapden::default_plan() : mapden::read_plan(plan_path);

    const bool has_ep = std::any_of(plan.begin(), plan.end(), [](const mapden::NoiseSpec& s) {
        return std::holds_alternative<mapden::EpSpec>(s.params);
    });
    mapden::EpNoiseLibrary lib;
    if (has_ep) {
        if (ep_library == "auto") {
            lib = mapden::extract_ep_library(clean);
        } else {
            lib = mapden::read_ep_library(ep_library);
        }
    }

    mapden::Dataset paired;
    for (const mapden::Record& r : clean.records()) {
        if (r.role != mapden::Role::clean) continue;
        paired.push_back(r);
        const mapden::NoisePlan beat_plan = mapden::instantiate_plan(plan, seed, r.beat.beat_id);
        paired.push_back(mapden::Record{
            mapden::corrupt(r.beat, beat_plan, has_ep ? &lib : nullptr), r.split,
            mapden::Role::noisy});
    }
    if (clean.config_hash()) paired.set_config_hash(*clean.config_hash());
    mapden::write_dataset(paired, out);
    std::cout << "wrote " << paired.size() << " rows to " << out << "\n";
}

void cmd_train(const std::string& data, const std::string& config_path,
               const std::string& out, const std::string& log) {
    const mapden::Dataset paired = mapden::read_dataset(data);
    mapden::VaeConfig config;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            throw mapden::Error(mapden::ErrorKind::config,
                                "cannot open config '" + config_path + "'");
        }
        nlohmann::json j;
        in >> j;
        config = mapden::VaeConfig::from_json(j);
    }
    mapden::VaeModel model = mapden::VaeModel::init(config);
    const mapden::TrainingReport report =
        mapden::train(model, paired, [](const mapden::EpochLog& log) {
            std::fprintf(stderr, "epoch %zu %s: neg_elbo %.4f recon %.4f kl %.4f\n",
                         log.epoch, log.split.c_str(), log.neg_elbo, log.recon_term,
                         log.kl_term);
        });
    if (!log.empty()) mapden::write_train_log(report, log);
    mapden::save_checkpoint(model, out,
                            paired.config_hash() ? *paired.config_hash() : std::string());
    std::cout << "trained " << report.optimizer_steps << " steps, best epoch "
              << report.best_epoch << ", best test loss " << report.best_test_neg_elbo
              << (report.posterior_collapse ? " [posterior-collapse alarm]" : "") << "\n";
}

void cmd_denoise(const std::string& ckpt, const std::string& in, const std::string& out) {
    auto [model, stamp] = mapden::load_checkpoint(ckpt);
    const mapden::Dataset ds = mapden::read_dataset(in);

    std::vector<mapden::Beat> beats;
    std::vector<mapden::Split> splits;
    for (const mapden::Record* r : input_rows(ds)) {
        beats.push_back(r->beat);
        splits.push_back(r->split);
    }
    mapden::Dataset result;
    std::vector<mapden::Beat> outputs = mapden::denoise_batch(model, beats);
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        result.push_back(
            mapden::Record{std::move(outputs[i]), splits[i], mapden::Role::clean});
    }
    if (ds.config_hash()) result.set_config_hash(*ds.config_hash());
    mapden::write_dataset(result, out);
    std::cout << "denoised " << result.size() << " beats to " << out << "\n";
}

void cmd_filter(const std::string& in, std::size_t order, double low_hz, double high_hz,
                const std::string& out) {
    const mapden::Dataset ds = mapden::read_dataset(in);
    const mapden::ButterworthDesign design =
        mapden::design_butterworth(order, {low_hz, high_hz}, mapden::FilterKind::bandpass);
    mapden::Dataset result;
    for (const mapden::Record* r : input_rows(ds)) {
        result.push_back(mapden::Record{mapden::clinical_filter(design, r->beat), r->split,
                                        mapden::Role::clean});
    }
    if (ds.config_hash()) result.set_config_hash(*ds.config_hash());
    mapden::write_dataset(result, out);
    std::cout << "filtered " << result.size() << " beats to " << out << "\n";
}

void print_rows(const mapden::EvalReport& report) {
    for (const mapden::ReportRow& r : report.rows) {
        std::printf("%-5s %-8s rmse %.5g +/- %.3g  pcc %.4f  psnr %.4g\n",
                    mapden::to_string(r.split).c_str(), r.label.c_str(), r.rmse.mean,
                    r.rmse.stddev, r.pcc.mean, r.psnr.mean);
    }
}

void cmd_eval(const std::string& clean_path, const std::string& noisy_path,
              const std::string& filtered_path, const std::string& vae_path,
              const std::string& out_prefix, const std::string& plot_beat,
              const std::string& plot_out, bool force, bool psnr_as_printed) {
    const mapden::Dataset clean = mapden::read_dataset(clean_path);
    const mapden::Dataset noisy = mapden::read_dataset(noisy_path);
    const mapden::Dataset filtered = mapden::read_dataset(filtered_path);
    const mapden::Dataset vae = mapden::read_dataset(vae_path);
    mapden::check_same_hash({&clean, &noisy, &filtered, &vae}, force);

    mapden::EvalReport report = mapden::evaluate(clean, noisy, filtered, vae, psnr_as_printed);
    if (clean.config_hash()) report.config_hash = *clean.config_hash();
    mapden::emit_report(report, out_prefix + ".json", out_prefix + ".csv");
    if (!plot_beat.empty()) {
        mapden::emit_plot_data(clean, noisy, filtered, vae, plot_beat,
                               plot_out.empty() ? plot_beat + "_plot.csv" : plot_out);
    }
    print_rows(report);
}

void cmd_run(const std::string& config_path, const std::string& out_dir, bool skip_train) {
    mapden::PipelineConfig config;
    if (!config_path.empty()) config = mapden::PipelineConfig::load(config_path);
    const mapden::PipelineArtifacts art = mapden::run_pipeline(config, out_dir, skip_train);
    std::cout << "pipeline done, config hash " << config.hash() << "\n";
    print_rows(art.report);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MAP beat synthesis, corruption, denoising and evaluation"};
    app.require_subcommand(1);

    // synth
    std::size_t patients = 42, beats_per_patient = 136;
    double test_fraction = 0.25;
    std::uint64_t seed = 1234;
    std::string out = "dataset.csv";
    auto* synth = app.add_subcommand("synth", "Generate a clean synthetic dataset");
    synth->add_option("--patients", patients, "Number of patients")->capture_default_str();
    synth->add_option("--beats-per-patient", beats_per_patient, "Beats per patient")
        ->capture_default_str();
    synth->add_option("--test-fraction", test_fraction, "Fraction of patients in test")
        ->capture_default_str();
    synth->add_option("--seed", seed, "RNG seed")->capture_default_str();
    synth->add_option("--out", out, "Output CSV")->capture_default_str();

    // corrupt
    std::string in_path, plan_path, ep_library = "auto", corrupt_out = "paired.csv";
    std::uint64_t corrupt_seed = 1234;
    auto* corrupt = app.add_subcommand("corrupt", "Add noise, producing clean/noisy pairs");
    corrupt->add_option("--in", in_path, "Clean dataset CSV")->required();
    corrupt->add_option("--plan", plan_path, "Noise plan JSON (default: built-in plan)");
    corrupt->add_option("--ep-library", ep_library, "'auto' or a library CSV")
        ->capture_default_str();
    corrupt->add_option("--seed", corrupt_seed, "Global corruption seed")
        ->capture_default_str();
    corrupt->add_option("--out", corrupt_out, "Output paired CSV")->capture_default_str();

    // extract-noise
    std::string extract_in, extract_out = "ep_library.csv";
    auto* extract = app.add_subcommand("extract-noise", "Build the EP residual library");
    extract->add_option("--in", extract_in, "Dataset CSV")->required();
    extract->add_option("--out", extract_out, "Library CSV")->capture_default_str();

    // train
    std::string train_data, train_config, train_out = "model.ckpt", train_log;
    auto* train = app.add_subcommand("train", "Train the denoising model");
    train->add_option("--data", train_data, "Paired dataset CSV")->required();
    train->add_option("--config", train_config, "Model config JSON (defaults if absent)");
    train->add_option("--out", train_out, "Checkpoint path")->capture_default_str();
    train->add_option("--log", train_log, "Per-epoch CSV log");

    // denoise
    std::string den_ckpt, den_in, den_out = "denoised.csv";
    auto* denoise = app.add_subcommand("denoise", "Run inference on noisy beats");
    denoise->add_option("--ckpt", den_ckpt, "Checkpoint path")->required();
    denoise->add_option("--in", den_in, "Dataset CSV (noisy rows used if present)")->required();
    denoise->add_option("--out", den_out, "Output CSV")->capture_default_str();

    // filter
    std::string filt_in, filt_out = "filtered.csv";
    std::size_t filt_order = 5;
    double low_hz = 0.5, high_hz = 220.0;
    auto* filter = app.add_subcommand("filter", "Zero-phase Butterworth baseline");
    filter->add_option("--in", filt_in, "Dataset CSV (noisy rows used if present)")->required();
    filter->add_option("--order", filt_order, "Filter order")->capture_default_str();
    filter->add_option("--low-hz", low_hz, "Low cutoff")->capture_default_str();
    filter->add_option("--high-hz", high_hz, "High cutoff")->capture_default_str();
    filter->add_option("--out", filt_out, "Output CSV")->capture_default_str();

    // eval
    std::string ev_clean, ev_noisy, ev_filtered, ev_vae, ev_out = "report";
    std::string plot_beat, plot_out;
    bool force = false, psnr_as_printed = false;
    auto* eval = app.add_subcommand("eval", "Metric report against the clean reference");
    eval->add_option("--clean", ev_clean)->required();
    eval->add_option("--noisy", ev_noisy)->required();
    eval->add_option("--filtered", ev_filtered)->required();
    eval->add_option("--vae", ev_vae)->required();
    eval->add_option("--out", ev_out, "Report path prefix (.json/.csv appended)")
        ->capture_default_str();
    eval->add_option("--plot-beat", plot_beat, "beat_id to dump per-sample plot data for");
    eval->add_option("--plot-out", plot_out, "Plot CSV path");
    eval->add_flag("--force", force, "Skip config-hash agreement check");
    eval->add_flag("--psnr-as-printed", psnr_as_printed,
                   "PSNR with unit MSE coefficient (audit mode)");

    // run
    std::string run_config, run_out_dir = "run_out";
    bool skip_train = false;
    auto* run = app.add_subcommand("run", "Full pipeline: synth through eval");
    run->add_option("--config", run_config, "Pipeline config JSON (defaults if absent)");
    run->add_option("--out-dir", run_out_dir, "Artifact directory")->capture_default_str();
    run->add_flag("--skip-train", skip_train, "Reuse an existing checkpoint");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            cmd_synth(patients, beats_per_patient, test_fraction, seed, out);
        } else if (corrupt->parsed()) {
            cmd_corrupt(in_path, plan_path, ep_library, corrupt_seed, corrupt_out);
        } else if (extract->parsed()) {
            cmd_extract_noise(extract_in, extract_out);
        } else if (train->parsed()) {
            cmd_train(train_data, train_config, train_out, train_log);
        } else if (denoise->parsed()) {
            cmd_denoise(den_ckpt, den_in, den_out);
        } else if (filter->parsed()) {
            cmd_filter(filt_in, filt_order, low_hz, high_hz, filt_out);
        } else if (eval->parsed()) {
            cmd_eval(ev_clean, ev_noisy, ev_filtered, ev_vae, ev_out, plot_beat, plot_out,
                     force, psnr_as_printed);
        } else if (run->parsed()) {
            cmd_run(run_config, run_out_dir, skip_train);
        }
    } catch (const mapden::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
