// End-to-end runs of the command-line pipeline on small synthetic fixtures,
// including the byte-identical rerun guarantee.

#include <cstdlib>
#include <fstream>
#include <map>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_util.hpp"
#include "unmix/common.hpp"
#include "unmix/envi.hpp"
#include "unmix/hypercube.hpp"

#include <Eigen/Dense>

using namespace unmix;
using testutil::TempDir;

namespace {

#ifndef UNMIX_CLI_PATH
#error "UNMIX_CLI_PATH must point at the pipeline binary"
#endif

int run_cli(const std::string& args) {
    const std::string cmd = std::string(UNMIX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::uint64_t file_hash(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64(bytes);
}

std::map<std::string, std::uint64_t> dir_hashes(const std::filesystem::path& dir) {
    std::map<std::string, std::uint64_t> hashes;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
            hashes[entry.path().lexically_relative(dir).string()] = file_hash(entry.path());
    return hashes;
}

// A little three-material scene with mild within-class noise.
HyperCube synthetic_scene(index_t lines, index_t samples, index_t bands, Rng& rng) {
    Eigen::MatrixXd sig(3, bands);
    for (index_t e = 0; e < 3; ++e)
        for (index_t b = 0; b < bands; ++b)
            sig(e, b) = 0.15 + 0.7 * std::exp(-8.0 * std::pow(double(b) / double(bands - 1) -
                                                                  (0.2 + 0.3 * double(e)),
                                                              2));
    HyperCube cube(lines, samples, bands, even_wavelengths(bands), Units::Reflectance);
    for (index_t p = 0; p < cube.pixel_count(); ++p) {
        const index_t e = p % 3;
        for (index_t b = 0; b < bands; ++b)
            cube.data()[static_cast<std::size_t>(p * bands + b)] =
                std::max(0.0, sig(e, b) + 0.01 * rng.normal());
    }
    return cube;
}

struct PipelineFixture {
    TempDir dir;
    std::filesystem::path config_path;

    PipelineFixture() {
        Rng rng(99);
        const HyperCube scene = synthetic_scene(18, 15, 8, rng);
        save_envi(scene, dir / "scene", Interleave::Bsq);

        nlohmann::json cfg;
        cfg["dataset"] = {{"name", "synthetic"}, {"cube", (dir / "scene").string()},
                          {"class_count", 3}};
        cfg["vca"] = {{"endmembers", 3}, {"seed", 4}};
        cfg["classify"] = {{"k_sigma", 1.5}, {"resample_seed", 5}};
        cfg["mixer"] = {{"kernel", 3}};
        cfg["unmixer"] = {{"patch_size", 4}, {"levels", 2},    {"base_channels", 4},
                          {"learning_rate", 0.05}, {"batch_size", 4}, {"max_epochs", 6},
                          {"convergence_window", 50}, {"seed", 6}};
        config_path = dir / "config.json";
        std::ofstream(config_path) << cfg.dump(2);
    }

    std::string args(const std::string& verb, const std::string& out) const {
        return verb + " --config " + config_path.string() + " --out " + (dir / out).string();
    }
};

}  // namespace

TEST(Cli, MissingConfigIsExitTwo) {
    EXPECT_EQ(run_cli("render --config /nonexistent/config.json --out /tmp/unused"), 2);
}

TEST(Cli, CalibrateWithMissingPanelFileIsExitTwo) {
    TempDir dir;
    Rng rng(1);
    const HyperCube dark = testutil::random_cube(2, 3, 4, rng);
    save_envi(dark, dir / "dark", Interleave::Bsq);
    save_envi(dark, dir / "raw", Interleave::Bsq);
    nlohmann::json cfg;
    cfg["calibration"] = {{"dark_cube", (dir / "dark").string()},
                          {"raw_cube", (dir / "raw").string()},
                          {"panels", (dir / "missing_panels.json").string()}};
    std::ofstream(dir / "config.json") << cfg.dump();
    EXPECT_EQ(run_cli("calibrate --config " + (dir / "config.json").string() + " --out " +
                      (dir / "out").string()),
              2);
}

TEST(Cli, CalibratePipelineProducesReflectance) {
    TempDir dir;
    const index_t bands = 6;
    HyperCube dark(2, 3, bands, even_wavelengths(bands), Units::RawDn);
    for (double& v : dark.data()) v = 50.0;
    // Raw cube whose first pixels match the three panel levels.
    HyperCube raw(2, 3, bands, even_wavelengths(bands), Units::RawDn);
    const double dn_per_r = 200.0;
    const double levels[6] = {0.05, 0.05, 0.10, 0.10, 0.40, 0.40};
    for (index_t p = 0; p < 6; ++p)
        for (index_t b = 0; b < bands; ++b)
            raw.data()[static_cast<std::size_t>(p * bands + b)] = 50.0 + levels[p] * dn_per_r;
    save_envi(dark, dir / "dark", Interleave::Bsq);
    save_envi(raw, dir / "raw", Interleave::Bsq);

    std::ofstream(dir / "panels.json") << R"([
      {"reflectance": 0.05, "pixels": [[0,0],[0,1]]},
      {"reflectance": 0.10, "pixels": [[0,2],[1,0]]},
      {"reflectance": 0.40, "pixels": [[1,1],[1,2]]}
    ])";

    nlohmann::json cfg;
    cfg["calibration"] = {{"dark_cube", (dir / "dark").string()},
                          {"raw_cube", (dir / "raw").string()},
                          {"panels", (dir / "panels.json").string()}};
    std::ofstream(dir / "config.json") << cfg.dump();

    ASSERT_EQ(run_cli("calibrate --config " + (dir / "config.json").string() + " --out " +
                      (dir / "out").string()),
              0);
    const HyperCube calibrated = load_envi(dir / "out" / "calibrated.hdr");
    EXPECT_EQ(calibrated.units(), Units::Reflectance);
    // Pixel (1,1) sat on the 40% panel; the stored cube is float32.
    for (index_t b = 0; b < bands; ++b) EXPECT_NEAR(calibrated(1, 1, b), 0.40, 1e-6);
}

TEST(Cli, FullPipelineRunsAndIsByteIdenticalOnRerun) {
    PipelineFixture fx;

    for (const std::string out : {"out1", "out2"}) {
        ASSERT_EQ(run_cli(fx.args("build-dataset", out)), 0);
        ASSERT_EQ(run_cli(fx.args("train", out)), 0);
        ASSERT_EQ(run_cli(fx.args("evaluate", out)), 0);
        ASSERT_EQ(run_cli(fx.args("render", out)), 0);
    }

    // Mixed geometry: 18x15 with kernel 3 -> 6x5.
    const HyperCube mixed = load_envi(fx.dir / "out1" / "mixed.hdr");
    EXPECT_EQ(mixed.lines(), 6);
    EXPECT_EQ(mixed.samples(), 5);

    for (const char* artifact :
         {"endmembers.json", "classmap", "classmap.hdr", "classmap.json", "class_stats.json",
          "resampled", "resampled.hdr", "mixed", "mixed.hdr", "abundance", "abundance.hdr",
          "abundance.json", "model.ckpt", "loss_trace.csv", "train_report.json",
          "eval_report.json", "eval_table.txt", "render.png", "manifest-train.json"})
        EXPECT_TRUE(std::filesystem::exists(fx.dir / "out1" / artifact)) << artifact;

    // Byte-identical across the two runs.
    const auto h1 = dir_hashes(fx.dir / "out1");
    const auto h2 = dir_hashes(fx.dir / "out2");
    EXPECT_EQ(h1, h2);

    // Report carries the evaluation metrics and the comparison plot data.
    std::ifstream report_in(fx.dir / "out1" / "eval_report.json");
    nlohmann::json report;
    report_in >> report;
    EXPECT_TRUE(report.contains("mRMSE"));
    EXPECT_TRUE(report.contains("within_variance_fraction"));
    EXPECT_TRUE(std::filesystem::exists(fx.dir / "out1" / "endmember_compare_0.csv"));
    EXPECT_TRUE(std::filesystem::exists(fx.dir / "out1" / "endmember_compare_0.png"));

    std::ifstream table_in(fx.dir / "out1" / "eval_table.txt");
    const std::string table((std::istreambuf_iterator<char>(table_in)),
                            std::istreambuf_iterator<char>());
    for (const char* column : {"mRMSE", "mSAD", "RE", "Epochs"})
        EXPECT_NE(table.find(column), std::string::npos) << column;
    EXPECT_NE(table.find("this-run"), std::string::npos);
}

TEST(Cli, SeparateStagesMatchBuildDataset) {
    PipelineFixture fx;
    ASSERT_EQ(run_cli(fx.args("build-dataset", "chained")), 0);
    ASSERT_EQ(run_cli(fx.args("endmembers", "staged")), 0);
    ASSERT_EQ(run_cli(fx.args("classify", "staged")), 0);
    ASSERT_EQ(run_cli(fx.args("mix", "staged")), 0);

    for (const char* artifact : {"endmembers.json", "classmap", "resampled", "mixed", "abundance"})
        EXPECT_EQ(file_hash(fx.dir / "chained" / artifact), file_hash(fx.dir / "staged" / artifact))
            << artifact;
}

TEST(Cli, TrainResumeContinuesStepCounter) {
    PipelineFixture fx;
    ASSERT_EQ(run_cli(fx.args("build-dataset", "out")), 0);
    ASSERT_EQ(run_cli(fx.args("train", "out")), 0);

    std::ifstream first_in(fx.dir / "out" / "train_report.json");
    nlohmann::json first;
    first_in >> first;

    ASSERT_EQ(run_cli(fx.args("train", "out") + " --resume " +
                      (fx.dir / "out" / "model.ckpt").string()),
              0);
    std::ifstream second_in(fx.dir / "out" / "train_report.json");
    nlohmann::json second;
    second_in >> second;
    EXPECT_GT(second["steps"].get<long>(), first["steps"].get<long>());
}

TEST(Cli, SeedFlagChangesEndmemberSelection) {
    PipelineFixture fx;
    ASSERT_EQ(run_cli(fx.args("endmembers", "s0") + " --seed 0"), 0);
    ASSERT_EQ(run_cli(fx.args("endmembers", "s0b") + " --seed 0"), 0);
    EXPECT_EQ(file_hash(fx.dir / "s0" / "endmembers.json"),
              file_hash(fx.dir / "s0b" / "endmembers.json"));
}
