#pragma once

// Dense (height, width, channel) tensor with channel-last row-major layout,
// matching the (line, sample, band) order of cube patches.

#include <vector>

#include <Eigen/Dense>

#include "unmix/common.hpp"

namespace unmix::nn {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Tensor {
    index_t h = 0, w = 0, c = 0;
    Eigen::VectorXd data;

    Tensor() = default;
    Tensor(index_t h_, index_t w_, index_t c_) : h(h_), w(w_), c(c_) {
        data = Eigen::VectorXd::Zero(h * w * c);
    }

    index_t pixels() const { return h * w; }
    index_t size() const { return h * w * c; }

    double& at(index_t i, index_t j, index_t k) { return data[(i * w + j) * c + k]; }
    double at(index_t i, index_t j, index_t k) const { return data[(i * w + j) * c + k]; }

    // (pixels x channels) view of the same storage.
    Eigen::Map<MatrixRM> mat() { return {data.data(), h * w, c}; }
    Eigen::Map<const MatrixRM> mat() const { return {data.data(), h * w, c}; }

    static Tensor from_flat(const std::vector<double>& flat, index_t h, index_t w, index_t c) {
        Tensor t(h, w, c);
        if (static_cast<index_t>(flat.size()) != t.size())
            throw DimensionError("tensor: flat buffer size mismatch");
        for (index_t i = 0; i < t.size(); ++i) t.data[i] = flat[static_cast<std::size_t>(i)];
        return t;
    }
};

}  // namespace unmix::nn
