#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mapden/errors.hpp"
#include "mapden/pipeline.hpp"

using namespace mapden;

namespace {

PipelineConfig small_config() {
    PipelineConfig c;
    c.n_patients = 4;
    c.beats_per_patient = 6;
    c.test_fraction = 0.25;
    c.seed = 77;
    c.vae.epochs = 2;
    c.vae.seed = 3;
    return c;
}

} // namespace

TEST_CASE("config JSON: canonical hash, unknown keys rejected") {
    const PipelineConfig c = small_config();
    const std::string h1 = c.hash();
    CHECK(h1.size() == 16);
    CHECK(PipelineConfig::from_json(c.to_json()).hash() == h1);

    PipelineConfig other = c;
    other.seed += 1;
    CHECK(other.hash() != h1);

    nlohmann::json j = c.to_json();
    j["surprise"] = 1;
    CHECK_THROWS_AS((void)PipelineConfig::from_json(j), InvalidParamsError);

    nlohmann::json j2 = c.to_json();
    j2["vae"]["bogus_knob"] = true;
    CHECK_THROWS_AS((void)PipelineConfig::from_json(j2), InvalidParamsError);
}

TEST_CASE("run_pipeline produces stamped artifacts and is reproducible") {
    namespace fs = std::filesystem;
    const PipelineConfig config = small_config();
    const std::string dir1 = (fs::temp_directory_path() / "mapden_run1").string();
    const std::string dir2 = (fs::temp_directory_path() / "mapden_run2").string();
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    const PipelineArtifacts a1 = run_pipeline(config, dir1);
    for (const std::string* p :
         {&a1.clean_csv, &a1.paired_csv, &a1.ep_library_csv, &a1.checkpoint,
          &a1.train_log_csv, &a1.denoised_csv, &a1.filtered_csv, &a1.report_json,
          &a1.report_csv, &a1.plot_csv, &a1.manifest_json}) {
        CHECK(fs::exists(*p));
    }
    CHECK(a1.report.rows.size() == 6);
    CHECK(a1.report.config_hash == config.hash());
    CHECK(read_dataset(a1.paired_csv).config_hash() == config.hash());

    const PipelineArtifacts a2 = run_pipeline(config, dir2);
    for (std::size_t i = 0; i < a1.report.rows.size(); ++i) {
        const ReportRow& r1 = a1.report.rows[i];
        const ReportRow& r2 = a2.report.rows[i];
        CHECK(std::abs(r1.rmse.mean - r2.rmse.mean) < 1e-9);
        CHECK(std::abs(r1.pcc.mean - r2.pcc.mean) < 1e-9);
        CHECK(std::abs(r1.psnr.mean - r2.psnr.mean) < 1e-9);
    }

    // skip-train reuses the checkpoint and reproduces the eval exactly
    const PipelineArtifacts a3 = run_pipeline(config, dir1, /*skip_train=*/true);
    for (std::size_t i = 0; i < a1.report.rows.size(); ++i) {
        CHECK(a3.report.rows[i].rmse.mean == a1.report.rows[i].rmse.mean);
        CHECK(a3.report.rows[i].psnr.mean == a1.report.rows[i].psnr.mean);
    }

    // a different config must refuse the stale checkpoint
    PipelineConfig changed = config;
    changed.seed += 1;
    CHECK_THROWS_AS((void)run_pipeline(changed, dir1, /*skip_train=*/true), Error);

    // hash-mix refusal between runs of different configs
    PipelineConfig other = config;
    other.seed = 1234321;
    const std::string dir3 = (fs::temp_directory_path() / "mapden_run3").string();
    fs::remove_all(dir3);
    const PipelineArtifacts a4 = run_pipeline(other, dir3);
    const Dataset clean1 = read_dataset(a1.clean_csv);
    const Dataset mixed = read_dataset(a4.denoised_csv);
    const Dataset filt1 = read_dataset(a1.filtered_csv);
    const Dataset den1 = read_dataset(a1.denoised_csv);
    CHECK_THROWS_AS(check_same_hash({&clean1, &mixed, &filt1, &den1}, false),
                    AlignmentError);
    CHECK_NOTHROW(check_same_hash({&clean1, &mixed, &filt1, &den1}, true));

    fs::remove_all(dir1);
    fs::remove_all(dir2);
    fs::remove_all(dir3);
}

TEST_CASE("train log has the documented columns") {
    namespace fs = std::filesystem;
    const PipelineConfig config = small_config();
    const std::string dir = (fs::temp_directory_path() / "mapden_run_log").string();
    fs::remove_all(dir);
    (void)run_pipeline(config, dir);

    std::ifstream in(dir + "/train_log.csv");
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header == "epoch,split,neg_elbo,recon_term,kl_term");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2 * config.vae.epochs); // train + test per epoch
    fs::remove_all(dir);
}
