#pragma once

// Differentiable building blocks for the unmixing network. Every op comes as
// a forward and a matching analytic backward; the pairing is pinned down by
// the finite-difference gradient tests.

#include <cmath>

#include "unmix/nn/tensor.hpp"

namespace unmix::nn {

constexpr double kNormEps = 1e-5;

// --- 3x3 same convolution, zero padding, stride 1 ---------------------------
// Weights: (9 * c_in) x c_out, row index (ky*3 + kx) * c_in + ci.

inline MatrixRM im2col3x3(const Tensor& x) {
    MatrixRM col(x.pixels(), 9 * x.c);
    col.setZero();
    for (index_t i = 0; i < x.h; ++i) {
        for (index_t j = 0; j < x.w; ++j) {
            double* row = col.data() + (i * x.w + j) * 9 * x.c;
            for (index_t ky = 0; ky < 3; ++ky) {
                const index_t si = i + ky - 1;
                if (si < 0 || si >= x.h) continue;
                for (index_t kx = 0; kx < 3; ++kx) {
                    const index_t sj = j + kx - 1;
                    if (sj < 0 || sj >= x.w) continue;
                    const double* src = x.data.data() + (si * x.w + sj) * x.c;
                    double* dst = row + (ky * 3 + kx) * x.c;
                    for (index_t ci = 0; ci < x.c; ++ci) dst[ci] = src[ci];
                }
            }
        }
    }
    return col;
}

inline Tensor conv3x3(const Tensor& x, const Eigen::MatrixXd& weight,
                      const Eigen::Ref<const Eigen::VectorXd>& bias) {
    Tensor out(x.h, x.w, weight.cols());
    out.mat().noalias() = im2col3x3(x) * weight;
    out.mat().rowwise() += bias.transpose();
    return out;
}

// Accumulates parameter gradients, returns gradient w.r.t. the input.
inline Tensor conv3x3_backward(const Tensor& x, const Eigen::MatrixXd& weight,
                               const Tensor& grad_out, Eigen::MatrixXd& grad_weight,
                               Eigen::Ref<Eigen::VectorXd> grad_bias) {
    const MatrixRM col = im2col3x3(x);
    grad_weight.noalias() += col.transpose() * grad_out.mat();
    grad_bias.noalias() += grad_out.mat().colwise().sum().transpose();

    const MatrixRM grad_col = grad_out.mat() * weight.transpose();
    Tensor grad_in(x.h, x.w, x.c);
    for (index_t i = 0; i < x.h; ++i) {
        for (index_t j = 0; j < x.w; ++j) {
            const double* row = grad_col.data() + (i * x.w + j) * 9 * x.c;
            for (index_t ky = 0; ky < 3; ++ky) {
                const index_t si = i + ky - 1;
                if (si < 0 || si >= x.h) continue;
                for (index_t kx = 0; kx < 3; ++kx) {
                    const index_t sj = j + kx - 1;
                    if (sj < 0 || sj >= x.w) continue;
                    const double* src = row + (ky * 3 + kx) * x.c;
                    double* dst = grad_in.data.data() + (si * x.w + sj) * x.c;
                    for (index_t ci = 0; ci < x.c; ++ci) dst[ci] += src[ci];
                }
            }
        }
    }
    return grad_in;
}

// --- per-channel standardization over the patch (no learned statistics) -----

inline Tensor instance_norm(const Tensor& x) {
    Tensor out(x.h, x.w, x.c);
    const auto xm = x.mat();
    auto om = out.mat();
    for (index_t ch = 0; ch < x.c; ++ch) {
        const double mu = xm.col(ch).mean();
        const double var = (xm.col(ch).array() - mu).square().mean();
        om.col(ch) = (xm.col(ch).array() - mu) / std::sqrt(var + kNormEps);
    }
    return out;
}

inline Tensor instance_norm_backward(const Tensor& x, const Tensor& grad_out) {
    Tensor grad_in(x.h, x.w, x.c);
    const auto xm = x.mat();
    const auto gm = grad_out.mat();
    auto out = grad_in.mat();
    const double n = static_cast<double>(x.pixels());
    for (index_t ch = 0; ch < x.c; ++ch) {
        const double mu = xm.col(ch).mean();
        const double var = (xm.col(ch).array() - mu).square().mean();
        const double inv_std = 1.0 / std::sqrt(var + kNormEps);
        const Eigen::ArrayXd y = (xm.col(ch).array() - mu) * inv_std;
        const double g_mean = gm.col(ch).mean();
        const double gy_mean = (gm.col(ch).array() * y).sum() / n;
        out.col(ch) = (inv_std * (gm.col(ch).array() - g_mean - y * gy_mean)).matrix();
    }
    return grad_in;
}

// --- smooth activation (x * sigmoid(x)) -------------------------------------

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline Tensor silu(const Tensor& x) {
    Tensor out = x;
    for (index_t i = 0; i < out.size(); ++i) out.data[i] = x.data[i] * sigmoid(x.data[i]);
    return out;
}

inline Tensor silu_backward(const Tensor& x, const Tensor& grad_out) {
    Tensor grad_in(x.h, x.w, x.c);
    for (index_t i = 0; i < x.size(); ++i) {
        const double s = sigmoid(x.data[i]);
        grad_in.data[i] = grad_out.data[i] * s * (1.0 + x.data[i] * (1.0 - s));
    }
    return grad_in;
}

// --- 2x2 average pooling / nearest upsampling -------------------------------

inline Tensor avgpool2(const Tensor& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        throw DimensionError("avgpool2 requires even spatial dimensions");
    Tensor out(x.h / 2, x.w / 2, x.c);
    for (index_t i = 0; i < out.h; ++i)
        for (index_t j = 0; j < out.w; ++j)
            for (index_t ch = 0; ch < x.c; ++ch)
                out.at(i, j, ch) = 0.25 * (x.at(2 * i, 2 * j, ch) + x.at(2 * i, 2 * j + 1, ch) +
                                           x.at(2 * i + 1, 2 * j, ch) + x.at(2 * i + 1, 2 * j + 1, ch));
    return out;
}

inline Tensor avgpool2_backward(const Tensor& grad_out, index_t in_h, index_t in_w) {
    Tensor grad_in(in_h, in_w, grad_out.c);
    for (index_t i = 0; i < grad_out.h; ++i)
        for (index_t j = 0; j < grad_out.w; ++j)
            for (index_t ch = 0; ch < grad_out.c; ++ch) {
                const double g = 0.25 * grad_out.at(i, j, ch);
                grad_in.at(2 * i, 2 * j, ch) = g;
                grad_in.at(2 * i, 2 * j + 1, ch) = g;
                grad_in.at(2 * i + 1, 2 * j, ch) = g;
                grad_in.at(2 * i + 1, 2 * j + 1, ch) = g;
            }
    return grad_in;
}

inline Tensor upsample2(const Tensor& x) {
    Tensor out(2 * x.h, 2 * x.w, x.c);
    for (index_t i = 0; i < out.h; ++i)
        for (index_t j = 0; j < out.w; ++j)
            for (index_t ch = 0; ch < x.c; ++ch) out.at(i, j, ch) = x.at(i / 2, j / 2, ch);
    return out;
}

inline Tensor upsample2_backward(const Tensor& grad_out) {
    Tensor grad_in(grad_out.h / 2, grad_out.w / 2, grad_out.c);
    for (index_t i = 0; i < grad_out.h; ++i)
        for (index_t j = 0; j < grad_out.w; ++j)
            for (index_t ch = 0; ch < grad_out.c; ++ch)
                grad_in.at(i / 2, j / 2, ch) += grad_out.at(i, j, ch);
    return grad_in;
}

// --- channel concatenation ---------------------------------------------------

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.h != b.h || a.w != b.w) throw DimensionError("concat: spatial mismatch");
    Tensor out(a.h, a.w, a.c + b.c);
    for (index_t p = 0; p < a.pixels(); ++p) {
        for (index_t ch = 0; ch < a.c; ++ch) out.data[p * out.c + ch] = a.data[p * a.c + ch];
        for (index_t ch = 0; ch < b.c; ++ch) out.data[p * out.c + a.c + ch] = b.data[p * b.c + ch];
    }
    return out;
}

inline void split_channels_backward(const Tensor& grad_cat, index_t c_a, Tensor& grad_a,
                                    Tensor& grad_b) {
    grad_a = Tensor(grad_cat.h, grad_cat.w, c_a);
    grad_b = Tensor(grad_cat.h, grad_cat.w, grad_cat.c - c_a);
    for (index_t p = 0; p < grad_cat.pixels(); ++p) {
        for (index_t ch = 0; ch < c_a; ++ch)
            grad_a.data[p * c_a + ch] = grad_cat.data[p * grad_cat.c + ch];
        for (index_t ch = 0; ch < grad_b.c; ++ch)
            grad_b.data[p * grad_b.c + ch] = grad_cat.data[p * grad_cat.c + c_a + ch];
    }
}

// --- global average pooling --------------------------------------------------

inline Eigen::VectorXd global_avg_pool(const Tensor& x) {
    return x.mat().colwise().mean().transpose();
}

inline Tensor global_avg_pool_backward(const Eigen::VectorXd& grad_vec, index_t h, index_t w) {
    Tensor grad_in(h, w, grad_vec.size());
    const double scale = 1.0 / static_cast<double>(h * w);
    for (index_t p = 0; p < h * w; ++p)
        for (index_t ch = 0; ch < grad_vec.size(); ++ch)
            grad_in.data[p * grad_vec.size() + ch] = grad_vec(ch) * scale;
    return grad_in;
}

// --- softplus / softmax -------------------------------------------------------

inline double softplus(double v) {
    if (v > 30.0) return v;
    if (v < -30.0) return std::exp(v);
    return std::log1p(std::exp(v));
}

// Per-pixel softmax over the channel axis.
inline Tensor channel_softmax(const Tensor& x) {
    Tensor out(x.h, x.w, x.c);
    for (index_t p = 0; p < x.pixels(); ++p) {
        const double* src = x.data.data() + p * x.c;
        double* dst = out.data.data() + p * x.c;
        double mx = src[0];
        for (index_t ch = 1; ch < x.c; ++ch) mx = std::max(mx, src[ch]);
        double sum = 0.0;
        for (index_t ch = 0; ch < x.c; ++ch) {
            dst[ch] = std::exp(src[ch] - mx);
            sum += dst[ch];
        }
        for (index_t ch = 0; ch < x.c; ++ch) dst[ch] /= sum;
    }
    return out;
}

inline Tensor channel_softmax_backward(const Tensor& y, const Tensor& grad_out) {
    Tensor grad_in(y.h, y.w, y.c);
    for (index_t p = 0; p < y.pixels(); ++p) {
        const double* yp = y.data.data() + p * y.c;
        const double* gp = grad_out.data.data() + p * y.c;
        double dot = 0.0;
        for (index_t ch = 0; ch < y.c; ++ch) dot += yp[ch] * gp[ch];
        double* dst = grad_in.data.data() + p * y.c;
        for (index_t ch = 0; ch < y.c; ++ch) dst[ch] = yp[ch] * (gp[ch] - dot);
    }
    return grad_in;
}

}  // namespace unmix::nn
