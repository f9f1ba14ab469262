#pragma once

// Classical unmixing baselines: fully constrained least squares (abundances
// for known endmembers under non-negativity and sum-to-one) and a
// multiplicative-update non-negative matrix factorization with the
// sum-to-one constraint carried by an appended constant column.

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unmix/common.hpp"
#include "unmix/endmember.hpp"
#include "unmix/hypercube.hpp"

namespace unmix {

// argmin ||M^T a - x||_2 subject to a >= 0 and sum(a) = 1.
//
// Convex QP over a tiny simplex: every feasible support set is tried with an
// exact equality-constrained KKT solve and the best feasible stationary point
// wins. Exponential in E, which stays harmless at the endmember counts used
// here (E <= ~12); in exchange the constraints hold to machine precision.
inline Eigen::VectorXd fcls(const Eigen::VectorXd& x, const EndmemberSet& endmembers) {
    const index_t e_count = endmembers.count();
    if (e_count == 0) throw BadInputError("fcls: empty endmember set");
    if (endmembers.bands() != x.size())
        throw DimensionError("fcls: spectrum band count does not match endmembers");
    if (e_count == 1) return Eigen::VectorXd::Ones(1);

    const Eigen::MatrixXd& m = endmembers.signatures;  // E x B
    const Eigen::MatrixXd gram = m * m.transpose();    // E x E
    const Eigen::VectorXd rhs = m * x;                 // E

    Eigen::VectorXd best = Eigen::VectorXd::Zero(e_count);
    double best_obj = std::numeric_limits<double>::infinity();

    std::vector<index_t> support;
    support.reserve(static_cast<std::size_t>(e_count));
    for (std::uint64_t mask = 1; mask < (1ull << e_count); ++mask) {
        support.clear();
        for (index_t e = 0; e < e_count; ++e)
            if (mask & (1ull << e)) support.push_back(e);
        const index_t k = static_cast<index_t>(support.size());

        // KKT system for min ||M_S^T a - x||^2 with sum(a_S) = 1.
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
        Eigen::VectorXd b(k + 1);
        for (index_t i = 0; i < k; ++i) {
            for (index_t j = 0; j < k; ++j) kkt(i, j) = gram(support[static_cast<std::size_t>(i)], support[static_cast<std::size_t>(j)]);
            kkt(i, k) = 1.0;
            kkt(k, i) = 1.0;
            b(i) = rhs(support[static_cast<std::size_t>(i)]);
        }
        b(k) = 1.0;

        Eigen::VectorXd sol;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        if (lu.isInvertible()) {
            sol = lu.solve(b);
        } else {
            // Rank-deficient support: take the least-squares stationary point.
            sol = kkt.completeOrthogonalDecomposition().solve(b);
        }

        bool feasible = true;
        for (index_t i = 0; i < k; ++i)
            if (sol(i) < -1e-10) {
                feasible = false;
                break;
            }
        if (!feasible) continue;

        Eigen::VectorXd a = Eigen::VectorXd::Zero(e_count);
        for (index_t i = 0; i < k; ++i) a(support[static_cast<std::size_t>(i)]) = std::max(0.0, sol(i));
        const double sum = a.sum();
        if (sum <= 0.0) continue;
        a /= sum;  // restore sum-to-one after the tiny-negative clamp

        const double obj = (m.transpose() * a - x).squaredNorm();
        if (obj < best_obj) {
            best_obj = obj;
            best = a;
        }
    }
    return best;
}

struct FactorizationResult {
    Eigen::MatrixXd endmembers;  // p x B, non-negative
    Eigen::MatrixXd abundances;  // N x p, non-negative, row sums driven to 1
    std::vector<double> objective_trace;  // augmented Frobenius residual per iteration
};

// Multiplicative-update NMF of the N x B pixel matrix into abundances *
// endmembers. The sum-to-one constraint on abundance rows rides on an
// appended constant column of weight delta.
inline FactorizationResult nmf_unmix(const HyperCube& cube, index_t p, index_t iters,
                                     std::uint64_t seed, double delta = -1.0) {
    const index_t n = cube.pixel_count();
    const index_t bands = cube.bands();
    if (p < 1) throw BadInputError("nmf_unmix: p must be >= 1");
    if (iters < 1) throw BadInputError("nmf_unmix: iters must be >= 1");
    if (p > std::min(n, bands)) throw BadInputError("nmf_unmix: p exceeds min(N, B)");

    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        v(cube.data().data(), n, bands);
    // Weight of the sum-to-one column. The data maximum balances the penalty
    // against the fit; much larger weights stall the multiplicative updates.
    const double v_max = v.maxCoeff();
    if (delta <= 0.0) delta = std::max(v_max, 1e-12);

    // Seeded |Gaussian| init scaled to the data magnitude.
    Rng rng(seed);
    const double scale = std::sqrt(std::max(v.mean(), 1e-12) / static_cast<double>(p));
    Eigen::MatrixXd a(n, p), m(p, bands);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j < p; ++j) a(i, j) = std::abs(rng.normal()) * scale;
    for (index_t i = 0; i < p; ++i)
        for (index_t j = 0; j < bands; ++j) m(i, j) = std::abs(rng.normal()) * scale;

    const double eps = 1e-12;
    const Eigen::VectorXd ones_n = Eigen::VectorXd::Constant(n, delta);
    FactorizationResult result;
    result.objective_trace.reserve(static_cast<std::size_t>(iters));

    auto augmented_residual = [&]() {
        const double fit = (v - a * m).squaredNorm();
        const double pen = delta * delta * (a.rowwise().sum().array() - 1.0).square().sum();
        return std::sqrt(fit + pen);
    };

    for (index_t it = 0; it < iters; ++it) {
        // A step against the augmented system [V, delta*1] ~ A [M, delta*1].
        const Eigen::MatrixXd vm_t = v * m.transpose() + ones_n * Eigen::RowVectorXd::Constant(p, delta);
        const Eigen::MatrixXd mm_t = m * m.transpose() + Eigen::MatrixXd::Constant(p, p, delta * delta);
        a = a.cwiseProduct(vm_t).cwiseQuotient(((a * mm_t).array() + eps).matrix());

        // M step on the plain system.
        const Eigen::MatrixXd at_v = a.transpose() * v;
        const Eigen::MatrixXd at_a = a.transpose() * a;
        m = m.cwiseProduct(at_v).cwiseQuotient(((at_a * m).array() + eps).matrix());

        result.objective_trace.push_back(augmented_residual());
    }
    result.endmembers = std::move(m);
    result.abundances = std::move(a);
    return result;
}

}  // namespace unmix
