#pragma once

// Per-pixel abundance maps on the unit simplex, stored (line, sample, class).
// On disk: E-band float32 ENVI-style file plus a JSON sidecar with the class
// names.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "unmix/common.hpp"
#include "unmix/envi.hpp"
#include "unmix/hypercube.hpp"

namespace unmix {

constexpr double kSimplexTolerance = 1e-6;

struct AbundanceMap {
    index_t lines = 0;
    index_t samples = 0;
    index_t classes = 0;
    std::vector<double> values;  // lines * samples * classes, (line, sample, class)
    std::vector<std::string> class_names;

    double operator()(index_t l, index_t s, index_t e) const {
        return values[static_cast<std::size_t>((l * samples + s) * classes + e)];
    }
    double& operator()(index_t l, index_t s, index_t e) {
        return values[static_cast<std::size_t>((l * samples + s) * classes + e)];
    }
    const double* pixel(index_t l, index_t s) const {
        return values.data() + static_cast<std::size_t>((l * samples + s) * classes);
    }

    void validate_simplex(double tol = kSimplexTolerance) const {
        for (index_t p = 0; p < lines * samples; ++p) {
            double sum = 0.0;
            for (index_t e = 0; e < classes; ++e) {
                const double a = values[static_cast<std::size_t>(p * classes + e)];
                if (a < -tol) throw NumericError("negative abundance at pixel " + std::to_string(p));
                sum += a;
            }
            if (std::abs(sum - 1.0) > tol)
                throw NumericError("abundance sum " + std::to_string(sum) + " off the simplex at pixel " +
                                   std::to_string(p));
        }
    }
};

// The abundance planes ride in a HyperCube whose "bands" are classes; the
// wavelength slots just hold the class indices.
inline void save_abundance(const AbundanceMap& map, const std::filesystem::path& path,
                           Interleave interleave = Interleave::Bsq) {
    std::vector<double> idx(static_cast<std::size_t>(map.classes));
    for (index_t e = 0; e < map.classes; ++e) idx[static_cast<std::size_t>(e)] = static_cast<double>(e);
    HyperCube carrier(map.lines, map.samples, map.classes, idx, Units::RawDn, map.values);
    save_envi(carrier, path, interleave, EnviDataType::F32);

    nlohmann::json sidecar;
    sidecar["class_names"] = map.class_names;
    sidecar["classes"] = map.classes;
    std::filesystem::path meta = path;
    meta += ".json";
    std::ofstream out(meta);
    if (!out) throw IoError("cannot write abundance sidecar: " + meta.string());
    out << sidecar.dump(2) << "\n";
}

inline AbundanceMap load_abundance(const std::filesystem::path& path) {
    HyperCube carrier = load_envi(std::filesystem::path(path).concat(".hdr"));
    AbundanceMap map;
    map.lines = carrier.lines();
    map.samples = carrier.samples();
    map.classes = carrier.bands();
    map.values = carrier.data();
    std::filesystem::path meta = path;
    meta += ".json";
    std::ifstream in(meta);
    if (in) {
        nlohmann::json sidecar;
        try {
            in >> sidecar;
            map.class_names = sidecar.at("class_names").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError("malformed abundance sidecar " + meta.string() + ": " + ex.what());
        }
    } else {
        for (index_t e = 0; e < map.classes; ++e)
            map.class_names.push_back("class_" + std::to_string(e));
    }
    return map;
}

}  // namespace unmix
