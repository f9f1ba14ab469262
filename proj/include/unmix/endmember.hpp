#pragma once

// Endmember sets: E x B spectral signatures with optional per-band standard
// deviations, serialized as JSON {names, wavelengths, signatures, band_sigma}.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "unmix/common.hpp"

namespace unmix {

struct EndmemberSet {
    Eigen::MatrixXd signatures;              // E x B
    std::vector<std::string> names;          // E labels
    std::optional<Eigen::MatrixXd> band_sigma;  // E x B, when available
    std::vector<double> wavelengths;         // B entries, may be empty

    index_t count() const { return signatures.rows(); }
    index_t bands() const { return signatures.cols(); }

    void validate() const {
        if (signatures.rows() < 1) throw DimensionError("endmember set must have E >= 1");
        if (static_cast<index_t>(names.size()) != signatures.rows())
            throw DimensionError("endmember name count does not match signature rows");
        if (!signatures.allFinite()) throw NumericError("endmember signatures must be finite");
        if ((signatures.array() < 0.0).any())
            throw NumericError("endmember signatures must be non-negative");
        if (band_sigma) {
            if (band_sigma->rows() != signatures.rows() || band_sigma->cols() != signatures.cols())
                throw DimensionError("band_sigma shape does not match signatures");
            if ((band_sigma->array() < 0.0).any())
                throw NumericError("band_sigma must be non-negative");
        }
        if (!wavelengths.empty() &&
            static_cast<index_t>(wavelengths.size()) != signatures.cols())
            throw DimensionError("wavelength count does not match signature bands");
    }
};

inline nlohmann::json endmembers_to_json(const EndmemberSet& set) {
    nlohmann::json j;
    j["names"] = set.names;
    j["wavelengths"] = set.wavelengths;
    auto rows = nlohmann::json::array();
    for (index_t e = 0; e < set.count(); ++e) {
        auto row = nlohmann::json::array();
        for (index_t b = 0; b < set.bands(); ++b) row.push_back(set.signatures(e, b));
        rows.push_back(std::move(row));
    }
    j["signatures"] = std::move(rows);
    if (set.band_sigma) {
        auto srows = nlohmann::json::array();
        for (index_t e = 0; e < set.count(); ++e) {
            auto row = nlohmann::json::array();
            for (index_t b = 0; b < set.bands(); ++b) row.push_back((*set.band_sigma)(e, b));
            srows.push_back(std::move(row));
        }
        j["band_sigma"] = std::move(srows);
    } else {
        j["band_sigma"] = nullptr;
    }
    return j;
}

inline EndmemberSet endmembers_from_json(const nlohmann::json& j) {
    EndmemberSet set;
    try {
        set.names = j.at("names").get<std::vector<std::string>>();
        if (j.contains("wavelengths") && !j["wavelengths"].is_null())
            set.wavelengths = j["wavelengths"].get<std::vector<double>>();
        const auto& rows = j.at("signatures");
        const index_t e_count = static_cast<index_t>(rows.size());
        if (e_count == 0) throw FormatError("endmember JSON has no signatures");
        const index_t b_count = static_cast<index_t>(rows.at(0).size());
        set.signatures.resize(e_count, b_count);
        for (index_t e = 0; e < e_count; ++e) {
            const auto& row = rows.at(static_cast<std::size_t>(e));
            if (static_cast<index_t>(row.size()) != b_count)
                throw FormatError("ragged signature rows in endmember JSON");
            for (index_t b = 0; b < b_count; ++b)
                set.signatures(e, b) = row.at(static_cast<std::size_t>(b)).get<double>();
        }
        if (j.contains("band_sigma") && !j["band_sigma"].is_null()) {
            Eigen::MatrixXd sigma(e_count, b_count);
            const auto& srows = j["band_sigma"];
            for (index_t e = 0; e < e_count; ++e)
                for (index_t b = 0; b < b_count; ++b)
                    sigma(e, b) = srows.at(static_cast<std::size_t>(e))
                                      .at(static_cast<std::size_t>(b))
                                      .get<double>();
            set.band_sigma = std::move(sigma);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed endmember JSON: ") + ex.what());
    }
    set.validate();
    return set;
}

inline void save_endmembers(const EndmemberSet& set, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write endmember file: " + path.string());
    out << endmembers_to_json(set).dump(2) << "\n";
}

inline EndmemberSet load_endmembers(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open endmember file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError("cannot parse " + path.string() + ": " + ex.what());
    }
    return endmembers_from_json(j);
}

}  // namespace unmix
