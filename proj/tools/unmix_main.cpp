// Pipeline driver: calibrate raw push-broom cubes, extract endmembers, build
// classified + mixed datasets with abundance ground truth, train the neural
// unmixer, evaluate, and render false-color previews.
//
// Every command is deterministic for a fixed config and seeds: artifacts
// carry no timestamps and reruns are byte-identical.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "unmix/abundance.hpp"
#include "unmix/calibration.hpp"
#include "unmix/classical.hpp"
#include "unmix/common.hpp"
#include "unmix/endmember.hpp"
#include "unmix/envi.hpp"
#include "unmix/groundtruth.hpp"
#include "unmix/hypercube.hpp"
#include "unmix/metrics.hpp"
#include "unmix/mixer.hpp"
#include "unmix/nn/model.hpp"
#include "unmix/plot.hpp"
#include "unmix/registry.hpp"
#include "unmix/render.hpp"
#include "unmix/vca.hpp"

namespace fs = std::filesystem;
using namespace unmix;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunConfig {
    // dataset
    std::string dataset_name;
    std::string cube_path;
    std::string truth_endmembers;
    std::string truth_abundances;
    std::optional<std::array<index_t, 3>> expected_shape;  // lines, samples, bands
    index_t class_count = 0;

    // calibration
    std::string dark_cube, raw_cube, panels;

    // vca
    index_t vca_endmembers = 6;
    std::uint64_t vca_seed = 0;

    // classify
    std::string endmembers_file;
    double k_sigma = kDefaultVarianceK;
    std::uint64_t resample_seed = 0;

    // mixer
    index_t mixer_kernel = 3;
    std::string mix_cube_file, mix_classmap_file;

    // train / evaluate
    nlohmann::json unmixer = nlohmann::json::object();
    std::string train_cube_file;
    std::string checkpoint_file;
    std::string eval_cube_file;

    // render
    std::string render_input;
    std::string cmf_csv;

    std::string output_dir;
};

nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json dataset;
    dataset["name"] = c.dataset_name;
    dataset["cube"] = c.cube_path;
    dataset["truth_endmembers"] = c.truth_endmembers;
    dataset["truth_abundances"] = c.truth_abundances;
    if (c.expected_shape)
        dataset["expected_shape"] = {(*c.expected_shape)[0], (*c.expected_shape)[1],
                                     (*c.expected_shape)[2]};
    else
        dataset["expected_shape"] = nullptr;
    dataset["class_count"] = c.class_count;

    nlohmann::json j;
    j["dataset"] = std::move(dataset);
    j["calibration"] = {{"dark_cube", c.dark_cube}, {"raw_cube", c.raw_cube}, {"panels", c.panels}};
    j["vca"] = {{"endmembers", c.vca_endmembers}, {"seed", c.vca_seed}};
    j["classify"] = {{"endmembers_file", c.endmembers_file},
                     {"k_sigma", c.k_sigma},
                     {"resample_seed", c.resample_seed}};
    j["mixer"] = {{"kernel", c.mixer_kernel},
                  {"cube_file", c.mix_cube_file},
                  {"classmap_file", c.mix_classmap_file}};
    j["unmixer"] = c.unmixer;
    j["train"] = {{"cube_file", c.train_cube_file}};
    j["evaluate"] = {{"checkpoint", c.checkpoint_file}, {"cube_file", c.eval_cube_file}};
    j["render"] = {{"input", c.render_input}, {"cmf_csv", c.cmf_csv}};
    j["output_dir"] = c.output_dir;
    return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            c.dataset_name = d.value("name", std::string{});
            c.cube_path = d.value("cube", std::string{});
            c.truth_endmembers = d.value("truth_endmembers", std::string{});
            c.truth_abundances = d.value("truth_abundances", std::string{});
            if (d.contains("expected_shape") && !d["expected_shape"].is_null()) {
                const auto& s = d["expected_shape"];
                c.expected_shape = {{s.at(0).get<index_t>(), s.at(1).get<index_t>(),
                                     s.at(2).get<index_t>()}};
            }
            c.class_count = d.value("class_count", index_t{0});
        }
        if (j.contains("calibration")) {
            const auto& v = j["calibration"];
            c.dark_cube = v.value("dark_cube", std::string{});
            c.raw_cube = v.value("raw_cube", std::string{});
            c.panels = v.value("panels", std::string{});
        }
        if (j.contains("vca")) {
            c.vca_endmembers = j["vca"].value("endmembers", c.vca_endmembers);
            c.vca_seed = j["vca"].value("seed", c.vca_seed);
        }
        if (j.contains("classify")) {
            const auto& v = j["classify"];
            c.endmembers_file = v.value("endmembers_file", std::string{});
            c.k_sigma = v.value("k_sigma", c.k_sigma);
            c.resample_seed = v.value("resample_seed", c.resample_seed);
        }
        if (j.contains("mixer")) {
            const auto& v = j["mixer"];
            c.mixer_kernel = v.value("kernel", c.mixer_kernel);
            c.mix_cube_file = v.value("cube_file", std::string{});
            c.mix_classmap_file = v.value("classmap_file", std::string{});
        }
        if (j.contains("unmixer")) c.unmixer = j["unmixer"];
        if (j.contains("train")) c.train_cube_file = j["train"].value("cube_file", std::string{});
        if (j.contains("evaluate")) {
            c.checkpoint_file = j["evaluate"].value("checkpoint", std::string{});
            c.eval_cube_file = j["evaluate"].value("cube_file", std::string{});
        }
        if (j.contains("render")) {
            c.render_input = j["render"].value("input", std::string{});
            c.cmf_csv = j["render"].value("cmf_csv", std::string{});
        }
        c.output_dir = j.value("output_dir", std::string{});
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed config: ") + ex.what());
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("cannot parse config " + path + ": " + ex.what());
    }
    return config_from_json(j);
}

// The manifest records everything needed to reproduce the run. The output
// directory is blanked so reruns into different directories stay comparable.
void write_manifest(const RunConfig& config, const fs::path& out_dir, const std::string& command) {
    RunConfig canonical = config;
    canonical.output_dir.clear();
    const nlohmann::json config_json = config_to_json(canonical);
    const std::string canonical_text = config_json.dump();

    nlohmann::json manifest;
    manifest["command"] = command;
    manifest["config"] = config_json;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_text)));
    manifest["config_hash"] = std::string(hash);
    manifest["seeds"] = {{"vca", config.vca_seed},
                         {"resample", config.resample_seed},
                         {"unmixer", config.unmixer.value("seed", std::uint64_t{0})}};
    manifest["version"] = kVersion;

    std::ofstream out(out_dir / ("manifest-" + command + ".json"));
    if (!out) throw IoError("cannot write manifest for " + command);
    out << manifest.dump(2) << "\n";
}

fs::path with_hdr(const fs::path& p) {
    fs::path hdr = p;
    if (hdr.extension() != ".hdr") hdr += ".hdr";
    return hdr;
}

HyperCube load_cube_checked(const std::string& path, const RunConfig& config) {
    if (path.empty()) throw ConfigError("no cube path configured (dataset.cube)");
    HyperCube cube = load_envi(with_hdr(path));

    std::optional<std::array<index_t, 3>> expected = config.expected_shape;
    if (!expected && !config.dataset_name.empty()) {
        if (const auto d = find_dataset(config.dataset_name))
            expected = {{d->lines, d->samples, d->bands}};
    }
    if (expected) {
        const auto [lines, samples, bands] = *expected;
        if (cube.lines() != lines || cube.samples() != samples || cube.bands() != bands)
            throw BadInputError("cube shape (" + std::to_string(cube.lines()) + "," +
                                std::to_string(cube.samples()) + "," + std::to_string(cube.bands()) +
                                ") does not match expected (" + std::to_string(lines) + "," +
                                std::to_string(samples) + "," + std::to_string(bands) + ")");
    }
    return cube;
}

std::string default_path(const std::string& configured, const fs::path& fallback) {
    return configured.empty() ? fallback.string() : configured;
}

index_t resolve_class_count(const RunConfig& config) {
    if (config.class_count > 0) return config.class_count;
    if (!config.dataset_name.empty())
        if (const auto d = find_dataset(config.dataset_name)) return d->class_count;
    return config.vca_endmembers;
}

nn::UnmixerConfig resolve_unmixer_config(const RunConfig& config, index_t bands,
                                         std::optional<std::uint64_t> seed_override) {
    nlohmann::json u = config.unmixer;
    if (!u.contains("bands") || u["bands"].get<index_t>() <= 0) u["bands"] = bands;
    if (!u.contains("endmembers") || u["endmembers"].get<index_t>() <= 0)
        u["endmembers"] = resolve_class_count(config);
    if (seed_override) u["seed"] = *seed_override;
    return nn::unmixer_config_from_json(u);
}

// ---------------------------------------------------------------------------
// commands

void cmd_calibrate(const RunConfig& config, const fs::path& out) {
    if (config.panels.empty()) throw ConfigError("calibration.panels is required");
    if (!fs::exists(config.panels)) throw IoError("panel file not found: " + config.panels);

    const HyperCube dark = load_envi(with_hdr(config.dark_cube));
    const HyperCube raw = load_envi(with_hdr(config.raw_cube));
    const std::vector<PanelSample> panels = load_panels(config.panels, raw);
    const CalibrationModel model = fit_calibration(dark, panels);

    ClipStats clip;
    const HyperCube reflectance = apply_calibration(model, raw, &clip);
    if (clip.clipped_overshoot > 0)
        std::cerr << "warning: " << clip.clipped_overshoot
                  << " reflectance values above 1+tolerance were clipped\n";

    save_envi(reflectance, out / "calibrated", Interleave::Bsq);
    std::ofstream model_out(out / "calibration.json");
    model_out << calibration_to_json(model).dump(2) << "\n";
    write_manifest(config, out, "calibrate");
    std::cout << "calibrated cube: " << (out / "calibrated").string() << "\n";
}

void cmd_endmembers(const RunConfig& config, const fs::path& out,
                    std::optional<std::uint64_t> seed_override) {
    const HyperCube cube = load_cube_checked(config.cube_path, config);
    const std::uint64_t seed = seed_override.value_or(config.vca_seed);
    const EndmemberSet set = vca_extract(cube, config.vca_endmembers, seed);
    save_endmembers(set, out / "endmembers.json");
    write_manifest(config, out, "endmembers");
    std::cout << "endmembers: " << (out / "endmembers.json").string() << "\n";
}

void run_classify(const RunConfig& config, const fs::path& out,
                  std::optional<std::uint64_t> seed_override, const HyperCube& cube,
                  const EndmemberSet& endmembers) {
    const ClassMap map = classify_cube(cube, endmembers);
    const ClassStats stats = class_statistics(cube, map);
    for (index_t e = 0; e < stats.classes(); ++e)
        if (stats.count[static_cast<std::size_t>(e)] == 0)
            std::cerr << "warning: class " << e << " ("
                      << map.class_names[static_cast<std::size_t>(e)] << ") has no pixels\n";

    const std::uint64_t seed = seed_override.value_or(config.resample_seed);
    const HyperCube resampled = resample_outliers(cube, map, stats, config.k_sigma, seed);

    save_classmap(map, out / "classmap");
    save_envi(resampled, out / "resampled", Interleave::Bsq);

    EndmemberSet stats_set;
    stats_set.signatures = stats.mean;
    stats_set.band_sigma = stats.sigma;
    stats_set.names = map.class_names;
    stats_set.wavelengths = cube.wavelengths();
    save_endmembers(stats_set, out / "class_stats.json");
}

void cmd_classify(const RunConfig& config, const fs::path& out,
                  std::optional<std::uint64_t> seed_override) {
    const HyperCube cube = load_cube_checked(config.cube_path, config);
    const EndmemberSet endmembers =
        load_endmembers(default_path(config.endmembers_file, out / "endmembers.json"));
    run_classify(config, out, seed_override, cube, endmembers);
    write_manifest(config, out, "classify");
    std::cout << "class map: " << (out / "classmap").string() << "\n";
}

void cmd_mix(const RunConfig& config, const fs::path& out) {
    const HyperCube cube =
        load_envi(with_hdr(default_path(config.mix_cube_file, out / "resampled")));
    const ClassMap map = load_classmap(default_path(config.mix_classmap_file, out / "classmap"));

    const auto [mixed, abundance] = mix_cube(cube, map, config.mixer_kernel);
    save_envi(mixed, out / "mixed", Interleave::Bsq);
    save_abundance(abundance, out / "abundance");
    write_manifest(config, out, "mix");
    std::cout << "mixed cube: " << (out / "mixed").string() << " (" << mixed.lines() << " x "
              << mixed.samples() << " x " << mixed.bands() << ")\n";
}

void cmd_build_dataset(const RunConfig& config, const fs::path& out,
                       std::optional<std::uint64_t> seed_override) {
    const HyperCube cube = load_cube_checked(config.cube_path, config);
    const std::uint64_t vca_seed = seed_override.value_or(config.vca_seed);
    const EndmemberSet endmembers = vca_extract(cube, config.vca_endmembers, vca_seed);
    save_endmembers(endmembers, out / "endmembers.json");

    run_classify(config, out, seed_override, cube, endmembers);
    const HyperCube resampled = load_envi(with_hdr(out / "resampled"));
    const ClassMap map = load_classmap((out / "classmap").string());
    const auto [mixed, abundance] = mix_cube(resampled, map, config.mixer_kernel);
    save_envi(mixed, out / "mixed", Interleave::Bsq);
    save_abundance(abundance, out / "abundance");
    write_manifest(config, out, "build-dataset");
    std::cout << "dataset ready under " << out.string() << "\n";
}

void write_loss_trace(const nn::TrainReport& report, const fs::path& path) {
    std::ofstream csv(path);
    csv << "epoch,re,sad,cos,ref,total\n";
    char line[192];
    for (std::size_t e = 0; e < report.trace.size(); ++e) {
        const auto& t = report.trace[e];
        std::snprintf(line, sizeof line, "%zu,%.12g,%.12g,%.12g,%.12g,%.12g\n", e + 1, t.re, t.sad,
                      t.cos, t.ref, t.total);
        csv << line;
    }
}

void cmd_train(const RunConfig& config, const fs::path& out,
               std::optional<std::uint64_t> seed_override, const std::string& resume) {
    fs::path cube_path = config.train_cube_file;
    if (cube_path.empty())
        cube_path = fs::exists(out / "mixed.hdr") ? out / "mixed" : fs::path(config.cube_path);
    const HyperCube cube = load_envi(with_hdr(cube_path));

    std::optional<nn::Unmixer> model;
    if (!resume.empty())
        model.emplace(nn::Unmixer::load_checkpoint(resume));
    else
        model.emplace(resolve_unmixer_config(config, cube.bands(), seed_override));

    nn::TrainReport report;
    try {
        report = model->train(cube);
    } catch (const nn::TrainDivergenceError& ex) {
        write_loss_trace(ex.partial, out / "loss_trace.csv");
        throw Error(std::string(ex.what()) + " (trace so far: " +
                    (out / "loss_trace.csv").string() + ")");
    }

    model->save_checkpoint(out / "model.ckpt");
    write_loss_trace(report, out / "loss_trace.csv");

    nlohmann::json rj;
    rj["epochs_run"] = report.epochs_run;
    rj["converged"] = report.converged;
    rj["final_re"] = report.trace.empty() ? 0.0 : report.trace.back().re;
    rj["steps"] = model->step();
    std::ofstream rep(out / "train_report.json");
    rep << rj.dump(2) << "\n";
    write_manifest(config, out, "train");
    std::cout << "checkpoint: " << (out / "model.ckpt").string() << " epochs=" << report.epochs_run
              << (report.converged ? " (converged)\n" : "\n");
}

void write_eval_table(const EvalReport& report, const std::string& dataset, const fs::path& path) {
    std::ofstream txt(path);
    char line[256];
    txt << "dataset            model         mRMSE    mSAD     RE       Epochs\n";
    std::snprintf(line, sizeof line, "%-18s %-13s %-8.4f %-8.4f %-8.4f %ld\n",
                  dataset.empty() ? "(unnamed)" : dataset.c_str(), "this-run", report.mrmse,
                  report.msad, report.re, static_cast<long>(report.epochs));
    txt << line;
    bool header = false;
    for (const auto& row : reference_results()) {
        if (!dataset.empty() && row.dataset != dataset) continue;
        if (!header) {
            txt << "-- published reference results --\n";
            header = true;
        }
        std::snprintf(line, sizeof line, "%-18s %-13s %-8.4f %-8.4f %-8.4f %ld\n",
                      row.dataset.c_str(), row.model.c_str(), row.mrmse, row.msad, row.re,
                      static_cast<long>(row.epochs));
        txt << line;
    }
}

void cmd_evaluate(const RunConfig& config, const fs::path& out) {
    const std::string ckpt = default_path(config.checkpoint_file, out / "model.ckpt");
    if (!fs::exists(ckpt)) throw IoError("checkpoint not found: " + ckpt);
    const nn::Unmixer model = nn::Unmixer::load_checkpoint(ckpt);

    fs::path cube_path = config.eval_cube_file;
    if (cube_path.empty())
        cube_path = fs::exists(out / "mixed.hdr") ? out / "mixed" : fs::path(config.cube_path);
    const HyperCube cube = load_envi(with_hdr(cube_path));

    const auto [pred_abundance, pred_endmembers] = model.infer(cube);
    save_abundance(pred_abundance, out / "predicted_abundance");
    save_endmembers(pred_endmembers, out / "predicted_endmembers.json");

    // Reconstruction from the stitched abundances and the cube-level M.
    HyperCube recon(cube.lines(), cube.samples(), cube.bands(), cube.wavelengths(), cube.units());
    for (index_t p = 0; p < cube.pixel_count(); ++p)
        for (index_t b = 0; b < cube.bands(); ++b) {
            double acc = 0.0;
            for (index_t e = 0; e < pred_abundance.classes; ++e)
                acc += pred_abundance.values[static_cast<std::size_t>(p * pred_abundance.classes + e)] *
                       pred_endmembers.signatures(e, b);
            recon.data()[static_cast<std::size_t>(p * cube.bands() + b)] = acc;
        }

    index_t epochs = 0;
    if (fs::exists(out / "train_report.json")) {
        std::ifstream rep(out / "train_report.json");
        nlohmann::json rj;
        rep >> rj;
        epochs = rj.value("epochs_run", index_t{0});
    }

    const std::string truth_a_path = default_path(config.truth_abundances, out / "abundance");
    const std::string truth_m_path =
        default_path(config.truth_endmembers, out / "class_stats.json");

    if (!fs::exists(truth_a_path + ".hdr") || !fs::exists(truth_m_path)) {
        std::cerr << "warning: ground truth missing, reporting reconstruction error only\n";
        EvalReport report;
        report.re = reconstruction_error(cube, recon);
        report.epochs = epochs;
        std::ofstream js(out / "eval_report.json");
        js << report_to_json(report).dump(2) << "\n";
        write_eval_table(report, config.dataset_name, out / "eval_table.txt");
        write_manifest(config, out, "evaluate");
        std::cout << "RE = " << report.re << " (no ground truth)\n";
        return;
    }

    const AbundanceMap truth_abundance = load_abundance(truth_a_path);
    const EndmemberSet truth_endmembers = load_endmembers(truth_m_path);

    EvalReport report =
        evaluate(pred_abundance, pred_endmembers, truth_abundance, truth_endmembers, cube, recon);
    report.epochs = epochs;

    nlohmann::json rj = report_to_json(report);

    // Within-variance fractions per class when the truth carries envelopes.
    if (truth_endmembers.band_sigma) {
        ClassStats stats;
        stats.mean = truth_endmembers.signatures;
        stats.sigma = *truth_endmembers.band_sigma;
        stats.count.assign(static_cast<std::size_t>(truth_endmembers.count()), 0);
        auto fractions = nlohmann::json::array();
        for (index_t e = 0; e < pred_endmembers.count(); ++e) {
            const index_t truth_e = report.permutation[static_cast<std::size_t>(e)];
            fractions.push_back(within_variance_check(
                pred_endmembers.signatures.row(e).transpose(), stats, truth_e, config.k_sigma));
        }
        rj["within_variance_fraction"] = std::move(fractions);
    }

    std::ofstream js(out / "eval_report.json");
    js << rj.dump(2) << "\n";
    write_eval_table(report, config.dataset_name, out / "eval_table.txt");

    // Per-class comparison data + plots: predicted vs truth mean vs envelope.
    for (index_t e = 0; e < pred_endmembers.count(); ++e) {
        const index_t truth_e = report.permutation[static_cast<std::size_t>(e)];
        const index_t bands = pred_endmembers.bands();
        std::vector<PlotSeries> series;
        PlotSeries predicted{{}, 0, 0, 255};
        PlotSeries mean{{}, 255, 128, 0};
        for (index_t b = 0; b < bands; ++b) {
            predicted.y.push_back(pred_endmembers.signatures(e, b));
            mean.y.push_back(truth_endmembers.signatures(truth_e, b));
        }
        series.push_back(std::move(predicted));
        series.push_back(std::move(mean));
        if (truth_endmembers.band_sigma) {
            PlotSeries lo{{}, 0, 160, 0};
            PlotSeries hi{{}, 0, 160, 0};
            for (index_t b = 0; b < bands; ++b) {
                const double s = (*truth_endmembers.band_sigma)(truth_e, b);
                lo.y.push_back(truth_endmembers.signatures(truth_e, b) - config.k_sigma * s);
                hi.y.push_back(truth_endmembers.signatures(truth_e, b) + config.k_sigma * s);
            }
            series.push_back(std::move(lo));
            series.push_back(std::move(hi));
        }

        const std::string stem = "endmember_compare_" + std::to_string(truth_e);
        std::ofstream csv(out / (stem + ".csv"));
        csv << "band,wavelength,predicted,mean,lo,hi\n";
        char line[192];
        for (index_t b = 0; b < bands; ++b) {
            const double wl =
                static_cast<index_t>(truth_endmembers.wavelengths.size()) == bands
                    ? truth_endmembers.wavelengths[static_cast<std::size_t>(b)]
                    : static_cast<double>(b);
            std::snprintf(line, sizeof line, "%ld,%.9g,%.9g,%.9g,%.9g,%.9g\n", static_cast<long>(b),
                          wl, series[0].y[static_cast<std::size_t>(b)],
                          series[1].y[static_cast<std::size_t>(b)],
                          series.size() > 2 ? series[2].y[static_cast<std::size_t>(b)] : 0.0,
                          series.size() > 3 ? series[3].y[static_cast<std::size_t>(b)] : 0.0);
            csv << line;
        }
        plot_series_png(series, out / (stem + ".png"));
    }

    write_manifest(config, out, "evaluate");
    char summary[160];
    std::snprintf(summary, sizeof summary, "mRMSE=%.4f mSAD=%.4f RE=%.4f epochs=%ld\n",
                  report.mrmse, report.msad, report.re, static_cast<long>(report.epochs));
    std::cout << summary;
}

void cmd_render(const RunConfig& config, const fs::path& out) {
    const std::string input = default_path(config.render_input, config.cube_path);
    const HyperCube cube = load_envi(with_hdr(input));
    const CmfTable cmf = config.cmf_csv.empty() ? cie1931_observer() : load_cmf_csv(config.cmf_csv);
    render_rgb(cube, out / "render.png", cmf);
    write_manifest(config, out, "render");
    std::cout << "render: " << (out / "render.png").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperspectral unmixing pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::int64_t> seed_flag;
    app.add_option("--config", config_path, "run configuration JSON")->required();
    app.add_option("--seed", seed_flag, "override every stage seed");
    app.add_option("--out", out_dir, "output directory");

    auto* calibrate = app.add_subcommand("calibrate", "fit panels + dark frame, write reflectance");
    auto* endmembers = app.add_subcommand("endmembers", "extract endmembers from the cube");
    auto* classify = app.add_subcommand("classify", "classify, compute stats, resample outliers");
    auto* mix = app.add_subcommand("mix", "window-mix the classified cube into a dataset");
    auto* build = app.add_subcommand("build-dataset", "endmembers + classify + mix in one run");
    auto* train = app.add_subcommand("train", "train the neural unmixer");
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint against ground truth");
    auto* render = app.add_subcommand("render", "false-color PNG of a cube");

    std::string resume;
    train->add_option("--resume", resume, "continue from a checkpoint");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig config = load_config(config_path);
        if (!config.output_dir.empty() && out_dir == "out") out_dir = config.output_dir;
        config.output_dir = out_dir;
        fs::create_directories(out_dir);
        std::optional<std::uint64_t> seed_override;
        if (seed_flag) {
            seed_override = static_cast<std::uint64_t>(*seed_flag);
            config.vca_seed = *seed_override;
            config.resample_seed = *seed_override;
            config.unmixer["seed"] = *seed_override;
        }

        if (calibrate->parsed()) cmd_calibrate(config, out_dir);
        if (endmembers->parsed()) cmd_endmembers(config, out_dir, seed_override);
        if (classify->parsed()) cmd_classify(config, out_dir, seed_override);
        if (mix->parsed()) cmd_mix(config, out_dir);
        if (build->parsed()) cmd_build_dataset(config, out_dir, seed_override);
        if (train->parsed()) cmd_train(config, out_dir, seed_override, resume);
        if (evaluate->parsed()) cmd_evaluate(config, out_dir);
        if (render->parsed()) cmd_render(config, out_dir);
    } catch (const BadInputError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
