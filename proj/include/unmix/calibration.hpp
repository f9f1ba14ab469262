#pragma once

// Radiometric calibration: per-band dark level from a closed-lens cube, then
// a per-band least-squares line from (panel mean DN - dark) to the panels'
// laboratory reflectance values.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "unmix/common.hpp"
#include "unmix/hypercube.hpp"

namespace unmix {

struct PanelSample {
    double reflectance = 0.0;   // known fraction, e.g. 0.05
    Eigen::MatrixXd pixels;     // n x B spectra sampled on the panel
};

struct CalibrationModel {
    Eigen::VectorXd dark;            // per-band dark mean (DN)
    Eigen::VectorXd gain;            // reflectance per DN
    Eigen::VectorXd offset;          // reflectance
    Eigen::VectorXd panel_residual;  // per-band RMS of the line fit

    index_t bands() const { return dark.size(); }
};

inline CalibrationModel fit_calibration(const HyperCube& dark_cube,
                                        const std::vector<PanelSample>& panels) {
    if (dark_cube.units() != Units::RawDn)
        throw BadInputError("fit_calibration expects a raw DN dark cube");
    if (panels.size() < 2)
        throw BadInputError("calibration is underdetermined: need at least two panels");
    {
        std::vector<double> refl;
        for (const auto& p : panels) refl.push_back(p.reflectance);
        std::sort(refl.begin(), refl.end());
        if (std::adjacent_find(refl.begin(), refl.end()) != refl.end())
            throw BadInputError("calibration panels must have distinct reflectances");
    }

    const index_t bands = dark_cube.bands();
    for (std::size_t i = 0; i < panels.size(); ++i) {
        if (panels[i].pixels.rows() == 0)
            throw BadInputError("panel " + std::to_string(i) + " has no pixel samples");
        if (panels[i].pixels.cols() != bands)
            throw DimensionError("panel " + std::to_string(i) + " band count mismatch");
    }

    CalibrationModel model;
    model.dark = Eigen::VectorXd::Zero(bands);
    const index_t n_dark = dark_cube.pixel_count();
    for (index_t p = 0; p < n_dark; ++p)
        model.dark += Eigen::Map<const Eigen::VectorXd>(dark_cube.spectrum(p), bands);
    model.dark /= static_cast<double>(n_dark);

    const index_t n_panels = static_cast<index_t>(panels.size());
    Eigen::MatrixXd mean_dn(n_panels, bands);
    Eigen::VectorXd refl(n_panels);
    for (index_t i = 0; i < n_panels; ++i) {
        mean_dn.row(i) = panels[static_cast<std::size_t>(i)].pixels.colwise().mean();
        refl(i) = panels[static_cast<std::size_t>(i)].reflectance;
    }

    model.gain.resize(bands);
    model.offset.resize(bands);
    model.panel_residual.resize(bands);
    for (index_t b = 0; b < bands; ++b) {
        // Least-squares line refl = gain * (DN - dark) + offset over panels.
        const Eigen::VectorXd x = mean_dn.col(b).array() - model.dark(b);
        const double x_mean = x.mean();
        const double sxx = (x.array() - x_mean).square().sum();
        if (sxx <= 0.0)
            throw NumericError("singular calibration fit: zero DN spread across panels in band " +
                               std::to_string(b));
        const double y_mean = refl.mean();
        const double sxy = ((x.array() - x_mean) * (refl.array() - y_mean)).sum();
        model.gain(b) = sxy / sxx;
        model.offset(b) = y_mean - model.gain(b) * x_mean;
        const Eigen::VectorXd fitted = model.gain(b) * x.array() + model.offset(b);
        model.panel_residual(b) =
            std::sqrt((fitted - refl).squaredNorm() / static_cast<double>(n_panels));
    }
    return model;
}

// reflectance = gain * (DN - dark) + offset, clamped into the valid
// reflectance range. Returns the calibrated cube; clip counts via `stats`.
inline HyperCube apply_calibration(const CalibrationModel& model, const HyperCube& raw,
                                   ClipStats* stats = nullptr) {
    if (raw.units() != Units::RawDn)
        throw BadInputError("apply_calibration expects a raw DN cube");
    if (raw.bands() != model.bands())
        throw DimensionError("apply_calibration: cube has " + std::to_string(raw.bands()) +
                             " bands, model has " + std::to_string(model.bands()));

    HyperCube out(raw.lines(), raw.samples(), raw.bands(), raw.wavelengths(), Units::Reflectance);
    const index_t bands = raw.bands();
    for (index_t p = 0; p < raw.pixel_count(); ++p) {
        const double* src = raw.spectrum(p);
        double* dst = out.data().data() + static_cast<std::size_t>(p * bands);
        for (index_t b = 0; b < bands; ++b)
            dst[b] = model.gain(b) * (src[b] - model.dark(b)) + model.offset(b);
    }
    const ClipStats clip = enforce_reflectance_range(out);
    if (stats) *stats = clip;
    return out;
}

inline nlohmann::json calibration_to_json(const CalibrationModel& model) {
    auto vec = [](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    nlohmann::json j;
    j["dark"] = vec(model.dark);
    j["gain"] = vec(model.gain);
    j["offset"] = vec(model.offset);
    j["panel_residual"] = vec(model.panel_residual);
    return j;
}

inline CalibrationModel calibration_from_json(const nlohmann::json& j) {
    auto vec = [](const nlohmann::json& a) {
        const auto v = a.get<std::vector<double>>();
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<index_t>(v.size())).eval();
    };
    CalibrationModel model;
    try {
        model.dark = vec(j.at("dark"));
        model.gain = vec(j.at("gain"));
        model.offset = vec(j.at("offset"));
        model.panel_residual = vec(j.at("panel_residual"));
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed calibration JSON: ") + ex.what());
    }
    if (model.gain.size() != model.dark.size() || model.offset.size() != model.dark.size())
        throw FormatError("calibration JSON vectors have unequal lengths");
    return model;
}

// Panel descriptor JSON: [{"reflectance": 0.05, "pixels": [[line,sample], ...]}, ...].
// Spectra are pulled out of the raw cube at the listed coordinates.
inline std::vector<PanelSample> load_panels(const std::filesystem::path& path,
                                            const HyperCube& raw) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open panel file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError("cannot parse " + path.string() + ": " + ex.what());
    }
    if (!j.is_array()) throw FormatError("panel JSON must be an array: " + path.string());

    std::vector<PanelSample> panels;
    for (const auto& entry : j) {
        PanelSample panel;
        try {
            panel.reflectance = entry.at("reflectance").get<double>();
            const auto& coords = entry.at("pixels");
            panel.pixels.resize(static_cast<index_t>(coords.size()), raw.bands());
            index_t row = 0;
            for (const auto& c : coords) {
                const index_t line = c.at(0).get<index_t>();
                const index_t sample = c.at(1).get<index_t>();
                if (line < 0 || line >= raw.lines() || sample < 0 || sample >= raw.samples())
                    throw BadInputError("panel pixel (" + std::to_string(line) + "," +
                                        std::to_string(sample) + ") outside the cube");
                panel.pixels.row(row++) =
                    Eigen::Map<const Eigen::VectorXd>(raw.spectrum(line, sample), raw.bands());
            }
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(std::string("malformed panel JSON: ") + ex.what());
        }
        panels.push_back(std::move(panel));
    }
    return panels;
}

}  // namespace unmix
