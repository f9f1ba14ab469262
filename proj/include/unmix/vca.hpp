#pragma once

// Vertex Component Analysis endmember extraction. The data is projected to a
// low-dimensional subspace (projective projection when the SNR estimate is
// above 15 + 10*log10(p) dB, otherwise PCA plus a constant coordinate), then
// p rounds of picking the pixel with maximal |projection| onto a random
// direction orthogonal to the endmembers found so far. Returned signatures
// are actual cube pixels.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unmix/common.hpp"
#include "unmix/endmember.hpp"
#include "unmix/hypercube.hpp"

namespace unmix {

namespace detail {

// Top-k eigenvectors (descending eigenvalue) of a symmetric PSD matrix.
inline Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& sym, index_t k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
    const index_t n = sym.rows();
    Eigen::MatrixXd out(n, k);
    for (index_t i = 0; i < k; ++i) out.col(i) = solver.eigenvectors().col(n - 1 - i);
    return out;
}

// Moore-Penrose pseudo-inverse; singular values below the cutoff are treated
// as zero.
inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double cutoff = 1e-10) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (index_t i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace detail

// Signal-to-noise estimate (dB) comparing total power with the power captured
// by the p-dimensional principal subspace of the mean-removed data.
inline double estimate_snr(const Eigen::MatrixXd& pixels, index_t p) {
    const index_t n = pixels.rows();
    const index_t bands = pixels.cols();
    if (p < 1) throw BadInputError("estimate_snr: p must be >= 1");
    if (n <= p) throw BadInputError("estimate_snr: need more pixels than p");
    if (p >= std::min(n, bands)) throw BadInputError("estimate_snr: p must be below min(N, B)");

    const Eigen::RowVectorXd mean = pixels.colwise().mean();
    const Eigen::MatrixXd centered = pixels.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
    const Eigen::MatrixXd basis = detail::top_eigenvectors(cov, p);  // B x p
    const Eigen::MatrixXd proj = centered * basis;                   // N x p

    const double power_total = pixels.squaredNorm() / static_cast<double>(n);
    const double power_sub = proj.squaredNorm() / static_cast<double>(n) + mean.squaredNorm();

    const double num = power_sub - (static_cast<double>(p) / static_cast<double>(bands)) * power_total;
    const double den = power_total - power_sub;
    if (den <= power_total * 1e-14)
        return std::numeric_limits<double>::infinity();  // residual power is zero
    if (num <= 0.0) return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(num / den);
}

inline double vca_snr_threshold(index_t p) {
    return 15.0 + 10.0 * std::log10(static_cast<double>(p));
}

inline EndmemberSet vca_extract(const HyperCube& cube, index_t p, std::uint64_t seed) {
    const index_t n = cube.pixel_count();
    const index_t bands = cube.bands();
    if (p < 1) throw BadInputError("vca: p must be >= 1");
    if (p > n) throw BadInputError("vca: p exceeds pixel count");
    if (p > bands) throw BadInputError("vca: p exceeds band count");

    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        pixels(cube.data().data(), n, bands);

    const Eigen::RowVectorXd mean = pixels.colwise().mean();
    const Eigen::MatrixXd centered = pixels.rowwise() - mean;
    const double spread = centered.cwiseAbs().maxCoeff();
    if (p > 1 && spread <= 1e-13 * std::max(1.0, pixels.cwiseAbs().maxCoeff()))
        throw NumericError("vca: degenerate data, all pixels identical");

    std::vector<index_t> picked;
    picked.reserve(static_cast<std::size_t>(p));

    if (p == 1) {
        // Pixel with maximal |projection| on the first principal direction.
        const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
        const Eigen::VectorXd axis = detail::top_eigenvectors(cov, 1).col(0);
        const Eigen::VectorXd proj = centered * axis;
        index_t best = 0;
        for (index_t i = 1; i < n; ++i)
            if (std::abs(proj(i)) > std::abs(proj(best))) best = i;
        picked.push_back(best);
    } else {
        const double snr = estimate_snr(pixels, p < std::min(n, bands) ? p : std::min(n, bands) - 1);
        Eigen::MatrixXd y;  // p x N working representation
        if (snr > vca_snr_threshold(p)) {
            // Projective projection onto the top-p subspace of the
            // (uncentered) correlation matrix.
            const Eigen::MatrixXd corr = pixels.transpose() * pixels / static_cast<double>(n);
            const Eigen::MatrixXd basis = detail::top_eigenvectors(corr, p);  // B x p
            const Eigen::MatrixXd x = (pixels * basis).transpose();           // p x N
            const Eigen::VectorXd u = x.rowwise().mean();
            y.resize(p, n);
            for (index_t i = 0; i < n; ++i) {
                const double den = x.col(i).dot(u);
                y.col(i) = std::abs(den) > 1e-300 ? (x.col(i) / den).eval()
                                                  : Eigen::VectorXd::Zero(p).eval();
            }
        } else {
            // PCA to p-1 dimensions plus a constant coordinate.
            const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
            const Eigen::MatrixXd basis = detail::top_eigenvectors(cov, p - 1);  // B x (p-1)
            const Eigen::MatrixXd x = (centered * basis).transpose();            // (p-1) x N
            const double c = x.colwise().norm().maxCoeff();
            y.resize(p, n);
            y.topRows(p - 1) = x;
            y.row(p - 1).setConstant(c > 0.0 ? c : 1.0);
        }

        Rng rng(seed);
        Eigen::MatrixXd chosen = Eigen::MatrixXd::Zero(p, p);
        chosen(p - 1, 0) = 1.0;  // seed column, replaced by the first pick
        for (index_t i = 0; i < p; ++i) {
            Eigen::VectorXd dir;
            double norm = 0.0;
            int attempts = 0;
            do {
                Eigen::VectorXd w(p);
                for (index_t k = 0; k < p; ++k) w(k) = rng.normal();
                // Component of w orthogonal to the subspace spanned so far.
                dir = w - chosen * (detail::pinv(chosen) * w);
                norm = dir.norm();
                if (++attempts > 100)
                    throw NumericError("vca: cannot find a direction orthogonal to chosen endmembers");
            } while (norm <= 1e-12);
            dir /= norm;

            const Eigen::VectorXd proj = y.transpose() * dir;
            index_t best = 0;
            for (index_t k = 1; k < n; ++k)
                if (std::abs(proj(k)) > std::abs(proj(best))) best = k;
            chosen.col(i) = y.col(best);
            picked.push_back(best);
        }
    }

    EndmemberSet set;
    set.signatures.resize(p, bands);
    for (index_t i = 0; i < p; ++i) set.signatures.row(i) = pixels.row(picked[static_cast<std::size_t>(i)]);
    for (index_t i = 0; i < p; ++i) set.names.push_back("endmember_" + std::to_string(i));
    set.wavelengths = cube.wavelengths();
    return set;
}

}  // namespace unmix
