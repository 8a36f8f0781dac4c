// Exercises the installed command surface end to end through the real binary.

#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef MAPDEN_CLI_PATH
#define MAPDEN_CLI_PATH "mapden"
#endif

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
    const std::string cmd = std::string(MAPDEN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "mapden_cli_test") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("cli: synth -> corrupt -> filter -> eval chain") {
    TempDir dir;
    const std::string ds = dir.file("clean.csv");
    const std::string paired = dir.file("paired.csv");
    const std::string filtered = dir.file("filtered.csv");
    const std::string lib = dir.file("lib.csv");

    CHECK(run("synth --patients 4 --beats-per-patient 5 --test-fraction 0.25 --seed 5 --out " +
              ds) == 0);
    CHECK(run("extract-noise --in " + ds + " --out " + lib) == 0);
    CHECK(run("corrupt --in " + ds + " --ep-library " + lib + " --seed 5 --out " + paired) ==
          0);
    CHECK(run("filter --in " + paired + " --out " + filtered) == 0);

    // standalone files carry no config-hash stamp: header + one row per beat
    std::ifstream fin(filtered);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(fin, line)) ++rows;
    CHECK(rows == 1 + 20);
}

TEST_CASE("cli: exit codes by error category") {
    TempDir dir;
    // config error: bad test fraction
    CHECK(run("synth --patients 4 --beats-per-patient 5 --test-fraction 1.5 --out " +
              dir.file("x.csv")) == 2);
    // data error: missing input file
    CHECK(run("filter --in " + dir.file("nonexistent.csv") + " --out " + dir.file("y.csv")) ==
          3);
    // data error: malformed dataset
    std::ofstream bad(dir.file("bad.csv"));
    bad << "beat_id,patient_id\n1,2\n";
    bad.close();
    CHECK(run("extract-noise --in " + dir.file("bad.csv") + " --out " + dir.file("z.csv")) ==
          3);
    // CLI parse error
    CHECK(run("synth --no-such-flag") != 0);
}

TEST_CASE("cli: run subcommand on a tiny config") {
    TempDir dir;
    const std::string config_path = dir.file("config.json");
    std::ofstream config(config_path);
    config << R"({
      "dataset": {"n_patients": 3, "beats_per_patient": 4, "test_fraction": 0.34},
      "seed": 9,
      "vae": {"epochs": 1, "seed": 4}
    })";
    config.close();

    const std::string out_dir = dir.file("out");
    CHECK(run("run --config " + config_path + " --out-dir " + out_dir) == 0);
    CHECK(fs::exists(out_dir + "/report.json"));
    CHECK(fs::exists(out_dir + "/report.csv"));
    CHECK(fs::exists(out_dir + "/plot_beat.csv"));
    CHECK(fs::exists(out_dir + "/model.ckpt"));

    std::ifstream plot(out_dir + "/plot_beat.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(plot, line)) ++rows;
    CHECK(rows == 371); // header + 370 samples

    // unknown config key -> exit 2
    std::ofstream bad(config_path);
    bad << R"({"dataset": {"n_patients": 3}, "mystery": 1})";
    bad.close();
    CHECK(run("run --config " + config_path + " --out-dir " + out_dir) == 2);
}
