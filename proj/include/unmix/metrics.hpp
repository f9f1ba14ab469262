#pragma once

// Evaluation metrics: RMSE, cube reconstruction error, spectral angle
// distance, cosine similarity, best-permutation endmember matching, and the
// combined evaluation report.
//
// Conventions fixed project-wide:
//  - reconstruction_error averages the band-summed squared error over pixels
//    only (no band normalization), so values are comparable across runs.
//  - arccos arguments are clamped into [-1, 1] before evaluation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "unmix/abundance.hpp"
#include "unmix/common.hpp"
#include "unmix/endmember.hpp"
#include "unmix/hypercube.hpp"

namespace unmix {

inline double rmse(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat) {
    if (x.size() != x_hat.size()) throw DimensionError("rmse: length mismatch");
    if (x.size() == 0) throw DimensionError("rmse: empty input");
    return std::sqrt((x - x_hat).squaredNorm() / static_cast<double>(x.size()));
}

inline double reconstruction_error(const HyperCube& cube, const HyperCube& recon) {
    if (cube.lines() != recon.lines() || cube.samples() != recon.samples() ||
        cube.bands() != recon.bands())
        throw DimensionError("reconstruction_error: shape mismatch");
    double total = 0.0;
    const std::size_t n = cube.data().size();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = recon.data()[i] - cube.data()[i];
        total += d * d;
    }
    return total / static_cast<double>(cube.pixel_count());
}

inline double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw NumericError("cosine_similarity: zero-norm vector");
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

inline double spectral_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::acos(cosine_similarity(a, b));
}

// Mean spectral angle over row-paired spectra.
inline double sad(const Eigen::MatrixXd& spectra, const Eigen::MatrixXd& spectra_hat) {
    if (spectra.rows() != spectra_hat.rows() || spectra.cols() != spectra_hat.cols())
        throw DimensionError("sad: shape mismatch");
    if (spectra.rows() == 0) throw DimensionError("sad: empty input");
    double total = 0.0;
    for (index_t i = 0; i < spectra.rows(); ++i) {
        const double na = spectra.row(i).norm();
        const double nb = spectra_hat.row(i).norm();
        if (na == 0.0 || nb == 0.0)
            throw NumericError("sad: zero-norm spectrum at index " + std::to_string(i));
        const double c = std::clamp(spectra.row(i).dot(spectra_hat.row(i)) / (na * nb), -1.0, 1.0);
        total += std::acos(c);
    }
    return total / static_cast<double>(spectra.rows());
}

// Pairwise spectral angles between predicted rows and truth rows.
inline Eigen::MatrixXd sad_matrix(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth) {
    Eigen::MatrixXd angles(predicted.rows(), truth.rows());
    for (index_t i = 0; i < predicted.rows(); ++i) {
        const double ni = predicted.row(i).norm();
        if (ni == 0.0) throw NumericError("sad: zero-norm spectrum at index " + std::to_string(i));
        for (index_t j = 0; j < truth.rows(); ++j) {
            const double nj = truth.row(j).norm();
            if (nj == 0.0) throw NumericError("sad: zero-norm spectrum at index " + std::to_string(j));
            const double c =
                std::clamp(predicted.row(i).dot(truth.row(j)) / (ni * nj), -1.0, 1.0);
            angles(i, j) = std::acos(c);
        }
    }
    return angles;
}

// Bijection predicted -> truth minimizing total spectral angle. Exhaustive
// over permutations; endmember counts stay small enough for that.
inline std::vector<index_t> match_endmembers(const EndmemberSet& predicted,
                                             const EndmemberSet& truth) {
    if (predicted.count() != truth.count())
        throw DimensionError("match_endmembers: endmember counts differ");
    if (predicted.bands() != truth.bands())
        throw DimensionError("match_endmembers: band counts differ");
    const index_t e_count = predicted.count();
    const Eigen::MatrixXd angles = sad_matrix(predicted.signatures, truth.signatures);

    std::vector<index_t> perm(static_cast<std::size_t>(e_count));
    std::iota(perm.begin(), perm.end(), index_t{0});
    std::vector<index_t> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (index_t i = 0; i < e_count; ++i)
            cost += angles(i, perm[static_cast<std::size_t>(i)]);
        if (cost < best_cost) {
            best_cost = cost;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

struct EvalReport {
    double mrmse = 0.0;  // abundance RMSE averaged over classes
    double msad = 0.0;   // radians, averaged over matched endmember pairs
    double re = 0.0;     // cube reconstruction error
    std::vector<index_t> permutation;     // predicted index -> truth index
    std::vector<double> per_class_rmse;   // indexed by truth class
    std::vector<double> per_class_sad;    // indexed by truth class
    std::vector<std::string> class_names; // truth class names
    index_t epochs = 0;
};

inline EvalReport evaluate(const AbundanceMap& pred_abundance, const EndmemberSet& pred_endmembers,
                           const AbundanceMap& truth_abundance, const EndmemberSet& truth_endmembers,
                           const HyperCube& cube, const HyperCube& reconstruction) {
    if (pred_abundance.lines != truth_abundance.lines ||
        pred_abundance.samples != truth_abundance.samples ||
        pred_abundance.classes != truth_abundance.classes)
        throw DimensionError("evaluate: abundance shapes differ");
    if (pred_abundance.classes != pred_endmembers.count())
        throw DimensionError("evaluate: abundance class count does not match endmembers");

    EvalReport report;
    report.permutation = match_endmembers(pred_endmembers, truth_endmembers);
    report.class_names = truth_abundance.class_names;

    const index_t e_count = pred_endmembers.count();
    const index_t n_pixels = pred_abundance.lines * pred_abundance.samples;
    report.per_class_rmse.assign(static_cast<std::size_t>(e_count), 0.0);
    report.per_class_sad.assign(static_cast<std::size_t>(e_count), 0.0);

    for (index_t pred_e = 0; pred_e < e_count; ++pred_e) {
        const index_t truth_e = report.permutation[static_cast<std::size_t>(pred_e)];
        double sq = 0.0;
        for (index_t p = 0; p < n_pixels; ++p) {
            const double d =
                pred_abundance.values[static_cast<std::size_t>(p * e_count + pred_e)] -
                truth_abundance.values[static_cast<std::size_t>(p * e_count + truth_e)];
            sq += d * d;
        }
        report.per_class_rmse[static_cast<std::size_t>(truth_e)] =
            std::sqrt(sq / static_cast<double>(n_pixels));
        report.per_class_sad[static_cast<std::size_t>(truth_e)] = spectral_angle(
            pred_endmembers.signatures.row(pred_e), truth_endmembers.signatures.row(truth_e));
    }

    report.mrmse = std::accumulate(report.per_class_rmse.begin(), report.per_class_rmse.end(), 0.0) /
                   static_cast<double>(e_count);
    report.msad = std::accumulate(report.per_class_sad.begin(), report.per_class_sad.end(), 0.0) /
                  static_cast<double>(e_count);
    report.re = reconstruction_error(cube, reconstruction);
    return report;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["mRMSE"] = r.mrmse;
    j["mSAD"] = r.msad;
    j["RE"] = r.re;
    j["epochs"] = r.epochs;
    j["permutation"] = r.permutation;
    j["per_class_rmse"] = r.per_class_rmse;
    j["per_class_sad"] = r.per_class_sad;
    j["class_names"] = r.class_names;
    return j;
}

}  // namespace unmix
