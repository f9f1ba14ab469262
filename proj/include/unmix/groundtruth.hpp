#pragma once

// Ground-truth construction: minimum-RMSE classification against endmember
// signatures, per-class band statistics, the per-band k-sigma variance test,
// and outlier resampling from the in-variance members of each class.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "unmix/common.hpp"
#include "unmix/endmember.hpp"
#include "unmix/envi.hpp"
#include "unmix/hypercube.hpp"

namespace unmix {

constexpr double kDefaultVarianceK = 1.5;

struct ClassMap {
    index_t lines = 0;
    index_t samples = 0;
    std::vector<int> labels;       // lines * samples, values in 0..E-1
    std::vector<std::string> class_names;
    std::vector<double> rmse_map;  // winning distance per pixel

    int label(index_t l, index_t s) const {
        return labels[static_cast<std::size_t>(l * samples + s)];
    }
};

struct ClassStats {
    Eigen::MatrixXd mean;   // E x B
    Eigen::MatrixXd sigma;  // E x B population standard deviation
    std::vector<index_t> count;

    index_t classes() const { return mean.rows(); }
    index_t bands() const { return mean.cols(); }
};

inline ClassMap classify_cube(const HyperCube& cube, const EndmemberSet& endmembers) {
    if (cube.bands() != endmembers.bands())
        throw DimensionError("classify_cube: cube has " + std::to_string(cube.bands()) +
                             " bands, endmembers have " + std::to_string(endmembers.bands()));
    const index_t n = cube.pixel_count();
    const index_t bands = cube.bands();
    const index_t e_count = endmembers.count();

    ClassMap map;
    map.lines = cube.lines();
    map.samples = cube.samples();
    map.class_names = endmembers.names;
    map.labels.resize(static_cast<std::size_t>(n));
    map.rmse_map.resize(static_cast<std::size_t>(n));

    // RMSE^2 * B = |x|^2 - 2 x.s + |s|^2; the cross terms come from one GEMM.
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        pixels(cube.data().data(), n, bands);
    const Eigen::VectorXd sig_sq = endmembers.signatures.rowwise().squaredNorm();
    const Eigen::MatrixXd cross = pixels * endmembers.signatures.transpose();  // N x E

    for (index_t i = 0; i < n; ++i) {
        const double pix_sq = pixels.row(i).squaredNorm();
        int best = 0;
        double best_sq = std::numeric_limits<double>::infinity();
        for (index_t e = 0; e < e_count; ++e) {
            const double sq = pix_sq - 2.0 * cross(i, e) + sig_sq(e);
            if (sq < best_sq) {  // strict: ties keep the lowest endmember index
                best_sq = sq;
                best = static_cast<int>(e);
            }
        }
        map.labels[static_cast<std::size_t>(i)] = best;
        map.rmse_map[static_cast<std::size_t>(i)] =
            std::sqrt(std::max(0.0, best_sq) / static_cast<double>(bands));
    }
    return map;
}

inline ClassStats class_statistics(const HyperCube& cube, const ClassMap& map) {
    if (map.lines != cube.lines() || map.samples != cube.samples())
        throw DimensionError("class_statistics: class map shape does not match cube");
    const index_t e_count = static_cast<index_t>(map.class_names.size());
    const index_t bands = cube.bands();

    ClassStats stats;
    stats.mean = Eigen::MatrixXd::Zero(e_count, bands);
    stats.sigma = Eigen::MatrixXd::Zero(e_count, bands);
    stats.count.assign(static_cast<std::size_t>(e_count), 0);

    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(e_count, bands);
    for (index_t p = 0; p < cube.pixel_count(); ++p) {
        const int e = map.labels[static_cast<std::size_t>(p)];
        const Eigen::Map<const Eigen::VectorXd> spec(cube.spectrum(p), bands);
        stats.mean.row(e) += spec.transpose();
        sum_sq.row(e) += spec.array().square().matrix().transpose();
        ++stats.count[static_cast<std::size_t>(e)];
    }
    for (index_t e = 0; e < e_count; ++e) {
        const index_t c = stats.count[static_cast<std::size_t>(e)];
        if (c == 0) continue;  // empty class: zero mean/sigma, caller may warn
        stats.mean.row(e) /= static_cast<double>(c);
        const Eigen::ArrayXd var = sum_sq.row(e).array() / static_cast<double>(c) -
                                   stats.mean.row(e).array().square();
        stats.sigma.row(e) = var.max(0.0).sqrt().matrix();
    }
    return stats;
}

// True when every band of the spectrum lies within k*sigma of its class mean.
inline bool within_variance(const double* spectrum, const ClassStats& stats, index_t class_id,
                            double k) {
    for (index_t b = 0; b < stats.bands(); ++b)
        if (std::abs(spectrum[b] - stats.mean(class_id, b)) > k * stats.sigma(class_id, b))
            return false;
    return true;
}

// Fraction of bands inside the k*sigma envelope of the given class.
inline double within_variance_check(const Eigen::VectorXd& candidate, const ClassStats& stats,
                                    index_t class_id, double k = kDefaultVarianceK) {
    if (class_id < 0 || class_id >= stats.classes())
        throw BadInputError("within_variance_check: invalid class id " + std::to_string(class_id));
    if (candidate.size() != stats.bands())
        throw DimensionError("within_variance_check: band count mismatch");
    index_t inside = 0;
    for (index_t b = 0; b < stats.bands(); ++b)
        if (std::abs(candidate(b) - stats.mean(class_id, b)) <= k * stats.sigma(class_id, b))
            ++inside;
    return static_cast<double>(inside) / static_cast<double>(stats.bands());
}

// Pixels outside the k*sigma envelope of their class are replaced by a pixel
// drawn uniformly (seeded, row-major draw order) from the in-variance members
// of the same class; in-variance pixels are left unchanged.
inline HyperCube resample_outliers(const HyperCube& cube, const ClassMap& map,
                                   const ClassStats& stats, double k, std::uint64_t seed) {
    if (k <= 0.0) throw BadInputError("resample_outliers: k must be positive");
    if (map.lines != cube.lines() || map.samples != cube.samples())
        throw DimensionError("resample_outliers: class map shape does not match cube");
    if (stats.bands() != cube.bands())
        throw DimensionError("resample_outliers: stats band count does not match cube");

    const index_t n = cube.pixel_count();
    const index_t e_count = stats.classes();
    const index_t bands = cube.bands();

    std::vector<std::vector<index_t>> in_variance(static_cast<std::size_t>(e_count));
    std::vector<bool> is_outlier(static_cast<std::size_t>(n), false);
    for (index_t p = 0; p < n; ++p) {
        const int e = map.labels[static_cast<std::size_t>(p)];
        if (within_variance(cube.spectrum(p), stats, e, k))
            in_variance[static_cast<std::size_t>(e)].push_back(p);
        else
            is_outlier[static_cast<std::size_t>(p)] = true;
    }
    for (index_t e = 0; e < e_count; ++e)
        if (stats.count[static_cast<std::size_t>(e)] > 0 && in_variance[static_cast<std::size_t>(e)].empty())
            throw NumericError("resample_outliers: class " + std::to_string(e) +
                               " has no in-variance pixels to draw from");

    HyperCube out = cube;
    Rng rng(seed);
    for (index_t p = 0; p < n; ++p) {
        if (!is_outlier[static_cast<std::size_t>(p)]) continue;
        const int e = map.labels[static_cast<std::size_t>(p)];
        const auto& pool = in_variance[static_cast<std::size_t>(e)];
        const index_t donor = pool[static_cast<std::size_t>(rng.below(pool.size()))];
        std::memcpy(out.data().data() + static_cast<std::size_t>(p * bands),
                    cube.spectrum(donor), sizeof(double) * static_cast<std::size_t>(bands));
    }
    return out;
}

// On disk: single-band uint8 ENVI file plus a JSON sidecar with class names.
inline void save_classmap(const ClassMap& map, const std::filesystem::path& path) {
    HyperCube carrier(map.lines, map.samples, 1, {0.0}, Units::RawDn);
    for (index_t p = 0; p < map.lines * map.samples; ++p)
        carrier.data()[static_cast<std::size_t>(p)] = static_cast<double>(map.labels[static_cast<std::size_t>(p)]);
    save_envi(carrier, path, Interleave::Bsq, EnviDataType::U8);

    nlohmann::json sidecar;
    sidecar["class_names"] = map.class_names;
    std::filesystem::path meta = path;
    meta += ".json";
    std::ofstream out(meta);
    if (!out) throw IoError("cannot write class map sidecar: " + meta.string());
    out << sidecar.dump(2) << "\n";
}

inline ClassMap load_classmap(const std::filesystem::path& path) {
    const HyperCube carrier = load_envi(std::filesystem::path(path).concat(".hdr"));
    if (carrier.bands() != 1) throw FormatError("class map file must have exactly one band");
    ClassMap map;
    map.lines = carrier.lines();
    map.samples = carrier.samples();
    map.labels.resize(static_cast<std::size_t>(map.lines * map.samples));
    int max_label = 0;
    for (index_t p = 0; p < map.lines * map.samples; ++p) {
        map.labels[static_cast<std::size_t>(p)] = static_cast<int>(carrier.data()[static_cast<std::size_t>(p)]);
        max_label = std::max(max_label, map.labels[static_cast<std::size_t>(p)]);
    }
    std::filesystem::path meta = path;
    meta += ".json";
    std::ifstream in(meta);
    if (in) {
        nlohmann::json sidecar;
        try {
            in >> sidecar;
            map.class_names = sidecar.at("class_names").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError("malformed class map sidecar " + meta.string() + ": " + ex.what());
        }
    } else {
        for (int e = 0; e <= max_label; ++e) map.class_names.push_back("class_" + std::to_string(e));
    }
    if (max_label >= static_cast<int>(map.class_names.size()))
        throw FormatError("class map label exceeds declared class count");
    map.rmse_map.assign(static_cast<std::size_t>(map.lines * map.samples), 0.0);
    return map;
}

}  // namespace unmix
