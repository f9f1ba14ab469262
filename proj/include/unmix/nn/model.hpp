#pragma once

// Unsupervised unmixing autoencoder.
//
// Encoder: `levels` stages of [3x3 conv -> per-channel standardization ->
// SiLU], downsampled 2x between stages. The deepest features feed two
// branches: a global-average-pool + dense head that emits an E x B endmember
// matrix through a softplus non-negativity map (averaged over the batch), and
// a decoder with skip connections that upsamples back to patch resolution and
// ends in a per-pixel softmax over the E abundance channels. Reconstruction
// is the plain matrix product abundances x endmembers, so the network can
// only explain the data through the linear mixing model.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "unmix/abundance.hpp"
#include "unmix/common.hpp"
#include "unmix/endmember.hpp"
#include "unmix/hypercube.hpp"
#include "unmix/metrics.hpp"
#include "unmix/nn/ops.hpp"
#include "unmix/nn/tensor.hpp"

namespace unmix::nn {

struct UnmixerConfig {
    index_t patch_size = 32;
    index_t levels = 3;
    index_t base_channels = 32;  // doubles per level
    index_t endmembers = 0;      // E, required
    index_t bands = 0;           // B, required
    double lambda_sad = 0.1;
    double lambda_cos = 0.01;
    double lambda_ref = 0.0;
    double learning_rate = 1e-3;
    index_t batch_size = 8;
    index_t max_epochs = 100;
    index_t convergence_window = 20;
    double convergence_eps = 1e-5;
    std::uint64_t seed = 0;
    std::optional<EndmemberSet> reference;

    index_t channels_at(index_t level) const { return base_channels << level; }
    index_t deepest_channels() const { return channels_at(levels - 1); }

    void validate() const {
        if (endmembers < 2) throw ConfigError("unmixer: endmembers must be >= 2");
        if (bands < 1) throw ConfigError("unmixer: bands must be >= 1");
        if (levels < 1) throw ConfigError("unmixer: levels must be >= 1");
        if (base_channels < 1) throw ConfigError("unmixer: base_channels must be >= 1");
        if (patch_size < 1) throw ConfigError("unmixer: patch_size must be >= 1");
        const index_t div = index_t{1} << (levels - 1);
        if (patch_size % div != 0)
            throw ConfigError("unmixer: patch_size must be divisible by 2^(levels-1)");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw ConfigError("unmixer: learning_rate must be positive and finite");
        for (double lambda : {lambda_sad, lambda_cos, lambda_ref})
            if (lambda < 0.0 || !std::isfinite(lambda))
                throw ConfigError("unmixer: loss weights must be finite and >= 0");
        if (batch_size < 1) throw ConfigError("unmixer: batch_size must be >= 1");
        if (max_epochs < 0) throw ConfigError("unmixer: max_epochs must be >= 0");
        if (convergence_window < 1) throw ConfigError("unmixer: convergence_window must be >= 1");
        if (!(convergence_eps >= 0.0)) throw ConfigError("unmixer: convergence_eps must be >= 0");
        if (reference) {
            reference->validate();
            if (reference->count() != endmembers || reference->bands() != bands)
                throw ConfigError("unmixer: reference endmembers must be E x B");
        }
    }
};

inline nlohmann::json unmixer_config_to_json(const UnmixerConfig& cfg) {
    nlohmann::json j;
    j["patch_size"] = cfg.patch_size;
    j["levels"] = cfg.levels;
    j["base_channels"] = cfg.base_channels;
    j["endmembers"] = cfg.endmembers;
    j["bands"] = cfg.bands;
    j["lambda_sad"] = cfg.lambda_sad;
    j["lambda_cos"] = cfg.lambda_cos;
    j["lambda_ref"] = cfg.lambda_ref;
    j["learning_rate"] = cfg.learning_rate;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["convergence_window"] = cfg.convergence_window;
    j["convergence_eps"] = cfg.convergence_eps;
    j["seed"] = cfg.seed;
    j["reference_endmembers"] = cfg.reference ? endmembers_to_json(*cfg.reference)
                                              : nlohmann::json(nullptr);
    return j;
}

inline UnmixerConfig unmixer_config_from_json(const nlohmann::json& j) {
    UnmixerConfig cfg;
    try {
        cfg.patch_size = j.value("patch_size", cfg.patch_size);
        cfg.levels = j.value("levels", cfg.levels);
        cfg.base_channels = j.value("base_channels", cfg.base_channels);
        cfg.endmembers = j.at("endmembers").get<index_t>();
        cfg.bands = j.at("bands").get<index_t>();
        cfg.lambda_sad = j.value("lambda_sad", cfg.lambda_sad);
        cfg.lambda_cos = j.value("lambda_cos", cfg.lambda_cos);
        cfg.lambda_ref = j.value("lambda_ref", cfg.lambda_ref);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
        cfg.convergence_window = j.value("convergence_window", cfg.convergence_window);
        cfg.convergence_eps = j.value("convergence_eps", cfg.convergence_eps);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("reference_endmembers") && !j["reference_endmembers"].is_null())
            cfg.reference = endmembers_from_json(j["reference_endmembers"]);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed unmixer config: ") + ex.what());
    }
    cfg.validate();
    return cfg;
}

// --- parameters ---------------------------------------------------------------

struct Param {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
};

class ParamStore {
  public:
    index_t add(const std::string& name, index_t rows, index_t cols) {
        Param p;
        p.name = name;
        p.value = Eigen::MatrixXd::Zero(rows, cols);
        p.grad = Eigen::MatrixXd::Zero(rows, cols);
        items_.push_back(std::move(p));
        return static_cast<index_t>(items_.size()) - 1;
    }

    Param& operator[](index_t i) { return items_[static_cast<std::size_t>(i)]; }
    const Param& operator[](index_t i) const { return items_[static_cast<std::size_t>(i)]; }

    index_t count() const { return static_cast<index_t>(items_.size()); }
    index_t total_size() const {
        index_t n = 0;
        for (const auto& p : items_) n += p.value.size();
        return n;
    }

    void zero_grads() {
        for (auto& p : items_) p.grad.setZero();
    }

    void sgd_step(double lr) {
        for (auto& p : items_) p.value -= lr * p.grad;
    }

    // Flat indexing across all parameters, used by the gradient checks.
    double get_flat(index_t flat) const { return locate(flat).first->value(locate(flat).second); }
    void set_flat(index_t flat, double v) { locate(flat).first->value(locate(flat).second) = v; }
    double grad_flat(index_t flat) const { return locate(flat).first->grad(locate(flat).second); }

    const std::vector<Param>& items() const { return items_; }
    std::vector<Param>& items() { return items_; }

  private:
    std::pair<const Param*, index_t> locate(index_t flat) const {
        for (const auto& p : items_) {
            if (flat < p.value.size()) return {&p, flat};
            flat -= p.value.size();
        }
        throw BadInputError("parameter index out of range");
    }
    std::pair<Param*, index_t> locate(index_t flat) {
        for (auto& p : items_) {
            if (flat < p.value.size()) return {&p, flat};
            flat -= p.value.size();
        }
        throw BadInputError("parameter index out of range");
    }

    std::vector<Param> items_;
};

// --- loss ---------------------------------------------------------------------

struct LossComponents {
    double re = 0.0;
    double sad = 0.0;
    double cos = 0.0;
    double ref = 0.0;
    double total = 0.0;
};

struct TrainReport {
    index_t epochs_run = 0;
    std::vector<LossComponents> trace;
    bool converged = false;
};

struct TrainDivergenceError : NumericError {
    TrainDivergenceError(const std::string& msg, TrainReport partial_report)
        : NumericError(msg), partial(std::move(partial_report)) {}
    TrainReport partial;
};

struct ForwardResult {
    std::vector<Tensor> abundances;       // per patch, (P, P, E)
    std::vector<Eigen::MatrixXd> m_patch; // per patch, E x B
    Eigen::MatrixXd m;                    // batch-shared E x B
    std::vector<Tensor> reconstructions;  // per patch, (P, P, B)
};

namespace detail {

inline double clamped_cos(double c) { return std::clamp(c, -1.0, 1.0); }

// d(acos)/du, with the singularity at |u| = 1 flattened to zero slope.
inline double dacos(double u) {
    const double uu = std::clamp(u, -1.0 + 1e-12, 1.0 - 1e-12);
    if (std::abs(u) >= 1.0 - 1e-12) return 0.0;
    return -1.0 / std::sqrt(1.0 - uu * uu);
}

inline std::vector<index_t> best_sad_permutation(const Eigen::MatrixXd& rows,
                                                 const Eigen::MatrixXd& reference) {
    EndmemberSet a, b;
    a.signatures = rows.cwiseMax(0.0);
    b.signatures = reference;
    a.names.assign(static_cast<std::size_t>(rows.rows()), "");
    b.names.assign(static_cast<std::size_t>(reference.rows()), "");
    return match_endmembers(a, b);
}

}  // namespace detail

// Composite loss over a batch: reconstruction error (band-summed squared
// error averaged over pixels), per-pixel spectral angle, mean pairwise cosine
// similarity between endmember rows, and, when a reference set is configured,
// mean spectral angle to the best-matched reference rows.
inline LossComponents unmixing_loss(const std::vector<Tensor>& inputs,
                                    const std::vector<Tensor>& recons, const Eigen::MatrixXd& m,
                                    const UnmixerConfig& cfg) {
    if (inputs.empty() || inputs.size() != recons.size())
        throw DimensionError("loss: batch size mismatch");
    index_t pixels = 0;
    double sq = 0.0, angle = 0.0;
    for (std::size_t n = 0; n < inputs.size(); ++n) {
        const Tensor& in = inputs[n];
        const Tensor& out = recons[n];
        if (in.size() != out.size()) throw DimensionError("loss: tensor shape mismatch");
        pixels += in.pixels();
        sq += (out.data - in.data).squaredNorm();
        for (index_t p = 0; p < in.pixels(); ++p) {
            const Eigen::Map<const Eigen::VectorXd> a(in.data.data() + p * in.c, in.c);
            const Eigen::Map<const Eigen::VectorXd> b(out.data.data() + p * out.c, out.c);
            const double na = std::max(a.norm(), 1e-150);
            const double nb = std::max(b.norm(), 1e-150);
            angle += std::acos(detail::clamped_cos(a.dot(b) / (na * nb)));
        }
    }

    LossComponents loss;
    loss.re = sq / static_cast<double>(pixels);
    loss.sad = angle / static_cast<double>(pixels);

    const index_t e_count = m.rows();
    for (index_t e = 0; e < e_count; ++e)
        if (m.row(e).norm() == 0.0)
            throw NumericError("loss: zero-norm endmember row " + std::to_string(e));
    double cos_sum = 0.0;
    for (index_t i = 0; i < e_count; ++i)
        for (index_t j = i + 1; j < e_count; ++j)
            cos_sum += m.row(i).dot(m.row(j)) / (m.row(i).norm() * m.row(j).norm());
    loss.cos = cos_sum / (static_cast<double>(e_count * (e_count - 1)) / 2.0);

    if (cfg.reference) {
        const auto perm = detail::best_sad_permutation(m, cfg.reference->signatures);
        double ref_angle = 0.0;
        for (index_t e = 0; e < e_count; ++e) {
            const auto mr = m.row(e);
            const auto rr = cfg.reference->signatures.row(perm[static_cast<std::size_t>(e)]);
            ref_angle += std::acos(
                detail::clamped_cos(mr.dot(rr) / std::max(mr.norm() * rr.norm(), 1e-150)));
        }
        loss.ref = ref_angle / static_cast<double>(e_count);
    }

    loss.total = loss.re + cfg.lambda_sad * loss.sad + cfg.lambda_cos * loss.cos +
                 cfg.lambda_ref * loss.ref;
    return loss;
}

// --- model ---------------------------------------------------------------------

class Unmixer {
  public:
    explicit Unmixer(UnmixerConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
        cfg_.validate();
        build_params();
        init_params();
    }

    const UnmixerConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    index_t step() const { return step_; }

    // ---- forward -------------------------------------------------------------

    struct PatchCache {
        std::vector<Tensor> enc_in, enc_pre, enc_norm, enc_act;
        std::vector<Tensor> dec_cat, dec_pre, dec_norm, dec_act;
        Eigen::VectorXd gap, dense_out;
        Tensor head_in, head_pre;
    };

    ForwardResult forward(const std::vector<Tensor>& batch,
                          std::vector<PatchCache>* caches = nullptr) const {
        if (batch.empty()) throw DimensionError("forward: empty batch");
        ForwardResult result;
        result.m = Eigen::MatrixXd::Zero(cfg_.endmembers, cfg_.bands);
        if (caches) caches->resize(batch.size());

        for (std::size_t n = 0; n < batch.size(); ++n) {
            const Tensor& input = batch[n];
            if (input.h != cfg_.patch_size || input.w != cfg_.patch_size || input.c != cfg_.bands)
                throw DimensionError("forward: patch shape does not match configuration");
            PatchCache local;
            PatchCache& cache = caches ? (*caches)[n] : local;
            run_patch(input, cache, result);
        }

        result.m /= static_cast<double>(batch.size());
        for (std::size_t n = 0; n < batch.size(); ++n) {
            Tensor recon(cfg_.patch_size, cfg_.patch_size, cfg_.bands);
            recon.mat().noalias() = result.abundances[n].mat() * result.m;
            result.reconstructions.push_back(std::move(recon));
        }
        return result;
    }

    LossComponents loss(const std::vector<Tensor>& batch, const ForwardResult& fwd) const {
        return unmixing_loss(batch, fwd.reconstructions, fwd.m, cfg_);
    }

    // Accumulates d(total)/d(theta) into the parameter gradients.
    void backward(const std::vector<Tensor>& batch, const ForwardResult& fwd,
                  std::vector<PatchCache>& caches) {
        const index_t batch_n = static_cast<index_t>(batch.size());
        const index_t e_count = cfg_.endmembers;
        index_t pixels = 0;
        for (const auto& t : batch) pixels += t.pixels();
        const double pixel_w = 1.0 / static_cast<double>(pixels);

        Eigen::MatrixXd grad_m = Eigen::MatrixXd::Zero(e_count, cfg_.bands);

        // Endmember-side penalties.
        if (cfg_.lambda_cos > 0.0) {
            const double pair_w =
                cfg_.lambda_cos / (static_cast<double>(e_count * (e_count - 1)) / 2.0);
            for (index_t i = 0; i < e_count; ++i)
                for (index_t j = i + 1; j < e_count; ++j) {
                    const Eigen::VectorXd a = fwd.m.row(i).transpose();
                    const Eigen::VectorXd b = fwd.m.row(j).transpose();
                    const double na = a.norm(), nb = b.norm();
                    const double c = a.dot(b) / (na * nb);
                    grad_m.row(i) += (pair_w * (b / (na * nb) - c * a / (na * na))).transpose();
                    grad_m.row(j) += (pair_w * (a / (na * nb) - c * b / (nb * nb))).transpose();
                }
        }
        if (cfg_.lambda_ref > 0.0 && cfg_.reference) {
            const auto perm = detail::best_sad_permutation(fwd.m, cfg_.reference->signatures);
            const double ref_w = cfg_.lambda_ref / static_cast<double>(e_count);
            for (index_t e = 0; e < e_count; ++e) {
                const Eigen::VectorXd a = fwd.m.row(e).transpose();
                const Eigen::VectorXd r =
                    cfg_.reference->signatures.row(perm[static_cast<std::size_t>(e)]).transpose();
                const double na = std::max(a.norm(), 1e-150), nr = std::max(r.norm(), 1e-150);
                const double u = detail::clamped_cos(a.dot(r) / (na * nr));
                grad_m.row(e) += (ref_w * detail::dacos(u) *
                                  (r / (na * nr) - u * a / (na * na)))
                                     .transpose();
            }
        }

        for (std::size_t n = 0; n < batch.size(); ++n) {
            const Tensor& input = batch[n];
            const Tensor& recon = fwd.reconstructions[n];

            // d total / d reconstruction: RE + SAD terms.
            Tensor grad_recon(recon.h, recon.w, recon.c);
            grad_recon.data = 2.0 * pixel_w * (recon.data - input.data);
            if (cfg_.lambda_sad > 0.0) {
                for (index_t p = 0; p < input.pixels(); ++p) {
                    const Eigen::Map<const Eigen::VectorXd> a(input.data.data() + p * input.c, input.c);
                    const Eigen::Map<const Eigen::VectorXd> r(recon.data.data() + p * recon.c, recon.c);
                    const double na = std::max(a.norm(), 1e-150);
                    const double nr = std::max(r.norm(), 1e-150);
                    const double u = detail::clamped_cos(a.dot(r) / (na * nr));
                    const double scale = cfg_.lambda_sad * pixel_w * detail::dacos(u);
                    Eigen::Map<Eigen::VectorXd>(grad_recon.data.data() + p * recon.c, recon.c) +=
                        scale * (a / (na * nr) - u * r / (nr * nr));
                }
            }

            // Through the mixing product: recon = A * M.
            Tensor grad_abund(recon.h, recon.w, e_count);
            grad_abund.mat().noalias() = grad_recon.mat() * fwd.m.transpose();
            grad_m.noalias() += fwd.abundances[n].mat().transpose() * grad_recon.mat();

            backward_patch(input, caches[n], fwd.abundances[n], grad_abund);
        }

        // The batch M is the mean of per-patch softplus outputs.
        const Eigen::MatrixXd grad_m_patch = grad_m / static_cast<double>(batch_n);
        for (std::size_t n = 0; n < batch.size(); ++n)
            backward_endmember_branch(caches[n], grad_m_patch);
    }

    // Convenience wrapper: zero grads, forward, loss, backward. The gradients
    // stay in params(); the loss is returned for monitoring.
    LossComponents gradients(const std::vector<Tensor>& batch) {
        params_.zero_grads();
        std::vector<PatchCache> caches;
        const ForwardResult fwd = forward(batch, &caches);
        const LossComponents lc = loss(batch, fwd);
        check_finite(lc);
        backward(batch, fwd, caches);
        return lc;
    }

    // ---- training --------------------------------------------------------------

    TrainReport train(const HyperCube& cube) {
        if (cube.bands() != cfg_.bands)
            throw DimensionError("train: cube bands do not match configuration");
        TrainReport report;
        if (cfg_.max_epochs == 0) return report;

        const PatchSet patches =
            extract_patches(cube, cfg_.patch_size, cfg_.patch_size, PadMode::Reflect);
        const index_t n_patches = static_cast<index_t>(patches.patches.size());

        for (index_t epoch = 0; epoch < cfg_.max_epochs; ++epoch) {
            // Seeded random visiting order and a dihedral op per patch.
            std::vector<index_t> order(static_cast<std::size_t>(n_patches));
            for (index_t i = 0; i < n_patches; ++i) order[static_cast<std::size_t>(i)] = i;
            for (index_t i = n_patches; i > 1; --i)
                std::swap(order[static_cast<std::size_t>(i - 1)],
                          order[static_cast<std::size_t>(rng_.below(static_cast<std::uint64_t>(i)))]);
            std::vector<int> ops(static_cast<std::size_t>(n_patches));
            for (auto& op : ops) op = static_cast<int>(rng_.below(8));

            LossComponents epoch_loss;
            index_t seen = 0;
            for (index_t start = 0; start < n_patches; start += cfg_.batch_size) {
                const index_t stop = std::min(start + cfg_.batch_size, n_patches);
                std::vector<Tensor> batch;
                batch.reserve(static_cast<std::size_t>(stop - start));
                for (index_t i = start; i < stop; ++i) {
                    const index_t pi = order[static_cast<std::size_t>(i)];
                    const std::vector<double> aug =
                        augment(patches.patches[static_cast<std::size_t>(pi)], cfg_.patch_size,
                                cfg_.bands, ops[static_cast<std::size_t>(pi)]);
                    batch.push_back(
                        Tensor::from_flat(aug, cfg_.patch_size, cfg_.patch_size, cfg_.bands));
                }

                LossComponents lc;
                try {
                    lc = gradients(batch);
                } catch (const NumericError& ex) {
                    report.epochs_run = epoch;
                    throw TrainDivergenceError(std::string("training diverged: ") + ex.what(),
                                               report);
                }
                params_.sgd_step(cfg_.learning_rate);
                ++step_;

                const double w = static_cast<double>(stop - start);
                epoch_loss.re += lc.re * w;
                epoch_loss.sad += lc.sad * w;
                epoch_loss.cos += lc.cos * w;
                epoch_loss.ref += lc.ref * w;
                seen += stop - start;
            }
            epoch_loss.re /= static_cast<double>(seen);
            epoch_loss.sad /= static_cast<double>(seen);
            epoch_loss.cos /= static_cast<double>(seen);
            epoch_loss.ref /= static_cast<double>(seen);
            epoch_loss.total = epoch_loss.re + cfg_.lambda_sad * epoch_loss.sad +
                               cfg_.lambda_cos * epoch_loss.cos + cfg_.lambda_ref * epoch_loss.ref;
            report.trace.push_back(epoch_loss);
            report.epochs_run = epoch + 1;

            if (static_cast<index_t>(report.trace.size()) >= cfg_.convergence_window) {
                double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
                for (index_t k = 0; k < cfg_.convergence_window; ++k) {
                    const double re =
                        report.trace[report.trace.size() - 1 - static_cast<std::size_t>(k)].re;
                    lo = std::min(lo, re);
                    hi = std::max(hi, re);
                }
                if (hi - lo < cfg_.convergence_eps) {
                    report.converged = true;
                    break;
                }
            }
        }
        return report;
    }

    // ---- inference ---------------------------------------------------------------

    std::pair<AbundanceMap, EndmemberSet> infer(const HyperCube& cube) const {
        if (cube.bands() != cfg_.bands)
            throw DimensionError("infer: cube bands do not match configuration");
        const PatchSet patches =
            extract_patches(cube, cfg_.patch_size, cfg_.patch_size, PadMode::Reflect);

        std::vector<std::vector<double>> planes;
        planes.reserve(patches.patches.size());
        Eigen::MatrixXd m_sum = Eigen::MatrixXd::Zero(cfg_.endmembers, cfg_.bands);

        const index_t n_patches = static_cast<index_t>(patches.patches.size());
        for (index_t start = 0; start < n_patches; start += cfg_.batch_size) {
            const index_t stop = std::min(start + cfg_.batch_size, n_patches);
            std::vector<Tensor> batch;
            for (index_t i = start; i < stop; ++i)
                batch.push_back(Tensor::from_flat(patches.patches[static_cast<std::size_t>(i)],
                                                  cfg_.patch_size, cfg_.patch_size, cfg_.bands));
            const ForwardResult fwd = forward(batch);
            for (std::size_t n = 0; n < batch.size(); ++n) {
                planes.push_back(std::vector<double>(
                    fwd.abundances[n].data.data(),
                    fwd.abundances[n].data.data() + fwd.abundances[n].size()));
                m_sum += fwd.m_patch[n];
            }
        }

        AbundanceMap map;
        map.lines = cube.lines();
        map.samples = cube.samples();
        map.classes = cfg_.endmembers;
        for (index_t e = 0; e < cfg_.endmembers; ++e)
            map.class_names.push_back("endmember_" + std::to_string(e));
        map.values = stitch_patches(planes, patches.origins, cfg_.patch_size, cfg_.endmembers,
                                    cube.lines(), cube.samples());

        EndmemberSet set;
        set.signatures = m_sum / static_cast<double>(n_patches);
        set.names = map.class_names;
        set.wavelengths = cube.wavelengths();
        return {std::move(map), std::move(set)};
    }

    // ---- checkpoints ---------------------------------------------------------------

    void save_checkpoint(const std::filesystem::path& path) const {
        nlohmann::json manifest;
        manifest["format"] = "unmix-checkpoint-1";
        manifest["config"] = unmixer_config_to_json(cfg_);
        manifest["step"] = step_;
        {
            char buf[17];
            auto st = rng_.state();
            auto rng_json = nlohmann::json::array();
            for (std::uint64_t word : st) {
                std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(word));
                rng_json.push_back(std::string(buf));
            }
            manifest["rng_state"] = std::move(rng_json);
        }
        auto params_json = nlohmann::json::array();
        for (const auto& p : params_.items()) {
            nlohmann::json pj;
            pj["name"] = p.name;
            pj["rows"] = p.value.rows();
            pj["cols"] = p.value.cols();
            params_json.push_back(std::move(pj));
        }
        manifest["params"] = std::move(params_json);

        const std::string manifest_text = manifest.dump();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint: " + path.string());
        out.write("UNMIXCK1", 8);
        const std::uint64_t len = manifest_text.size();
        out.write(reinterpret_cast<const char*>(&len), 8);
        out.write(manifest_text.data(), static_cast<std::streamsize>(manifest_text.size()));
        for (const auto& p : params_.items()) {
            std::vector<float> block(static_cast<std::size_t>(p.value.size()));
            for (index_t i = 0; i < p.value.size(); ++i)
                block[static_cast<std::size_t>(i)] = static_cast<float>(p.value.data()[i]);
            out.write(reinterpret_cast<const char*>(block.data()),
                      static_cast<std::streamsize>(block.size() * sizeof(float)));
        }
        if (!out) throw IoError("failed writing checkpoint: " + path.string());
    }

    static Unmixer load_checkpoint(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open checkpoint: " + path.string());
        char magic[8];
        in.read(magic, 8);
        if (!in || std::string(magic, 8) != "UNMIXCK1")
            throw FormatError("not an unmix checkpoint: " + path.string());
        std::uint64_t len = 0;
        in.read(reinterpret_cast<char*>(&len), 8);
        std::string manifest_text(len, '\0');
        in.read(manifest_text.data(), static_cast<std::streamsize>(len));
        if (!in) throw FormatError("truncated checkpoint manifest: " + path.string());

        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(manifest_text);
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(std::string("bad checkpoint manifest: ") + ex.what());
        }

        Unmixer model(unmixer_config_from_json(manifest.at("config")));
        model.step_ = manifest.value("step", index_t{0});
        if (manifest.contains("rng_state")) {
            std::array<std::uint64_t, 4> st{};
            const auto& rj = manifest["rng_state"];
            for (int i = 0; i < 4; ++i)
                st[static_cast<std::size_t>(i)] =
                    std::stoull(rj.at(static_cast<std::size_t>(i)).get<std::string>(), nullptr, 16);
            model.rng_.set_state(st);
        }

        const auto& params_json = manifest.at("params");
        if (static_cast<index_t>(params_json.size()) != model.params_.count())
            throw FormatError("checkpoint parameter list does not match the architecture");
        for (index_t i = 0; i < model.params_.count(); ++i) {
            auto& p = model.params_[i];
            const auto& pj = params_json.at(static_cast<std::size_t>(i));
            if (pj.at("name").get<std::string>() != p.name ||
                pj.at("rows").get<index_t>() != p.value.rows() ||
                pj.at("cols").get<index_t>() != p.value.cols())
                throw FormatError("checkpoint parameter " + p.name + " has unexpected shape");
            std::vector<float> block(static_cast<std::size_t>(p.value.size()));
            in.read(reinterpret_cast<char*>(block.data()),
                    static_cast<std::streamsize>(block.size() * sizeof(float)));
            if (!in) throw FormatError("truncated checkpoint data: " + path.string());
            for (index_t k = 0; k < p.value.size(); ++k)
                p.value.data()[k] = static_cast<double>(block[static_cast<std::size_t>(k)]);
        }
        return model;
    }

  private:
    void build_params() {
        enc_w_.clear();
        enc_b_.clear();
        dec_w_.clear();
        dec_b_.clear();
        index_t in_c = cfg_.bands;
        for (index_t l = 0; l < cfg_.levels; ++l) {
            const index_t out_c = cfg_.channels_at(l);
            enc_w_.push_back(params_.add("enc" + std::to_string(l) + ".conv.weight", 9 * in_c, out_c));
            enc_b_.push_back(params_.add("enc" + std::to_string(l) + ".conv.bias", out_c, 1));
            in_c = out_c;
        }
        dense_w_ = params_.add("endmember.dense.weight", cfg_.endmembers * cfg_.bands,
                               cfg_.deepest_channels());
        dense_b_ = params_.add("endmember.dense.bias", cfg_.endmembers * cfg_.bands, 1);
        for (index_t l = cfg_.levels - 2; l >= 0; --l) {
            const index_t skip_c = cfg_.channels_at(l);
            const index_t up_c = cfg_.channels_at(l + 1);
            dec_w_.push_back(params_.add("dec" + std::to_string(l) + ".conv.weight",
                                         9 * (up_c + skip_c), skip_c));
            dec_b_.push_back(params_.add("dec" + std::to_string(l) + ".conv.bias", skip_c, 1));
        }
        head_w_ = params_.add("head.conv.weight", 9 * cfg_.base_channels, cfg_.endmembers);
        head_b_ = params_.add("head.conv.bias", cfg_.endmembers, 1);
    }

    void init_params() {
        for (auto& p : params_.items()) {
            if (p.name.ends_with(".bias")) {
                p.value.setZero();
                continue;
            }
            // He-style scaling by fan-in (rows of the weight matrix).
            const double scale = std::sqrt(2.0 / static_cast<double>(p.value.rows()));
            for (index_t i = 0; i < p.value.size(); ++i) p.value.data()[i] = scale * rng_.normal();
        }
    }

    void run_patch(const Tensor& input, PatchCache& cache, ForwardResult& result) const {
        const index_t l_count = cfg_.levels;
        cache.enc_in.clear();
        cache.enc_pre.clear();
        cache.enc_norm.clear();
        cache.enc_act.clear();
        cache.dec_cat.clear();
        cache.dec_pre.clear();
        cache.dec_norm.clear();
        cache.dec_act.clear();

        Tensor x = input;
        for (index_t l = 0; l < l_count; ++l) {
            cache.enc_in.push_back(x);
            Tensor pre = conv3x3(x, params_[enc_w_[static_cast<std::size_t>(l)]].value,
                                 params_[enc_b_[static_cast<std::size_t>(l)]].value.col(0));
            Tensor norm = instance_norm(pre);
            Tensor act = silu(norm);
            cache.enc_pre.push_back(std::move(pre));
            cache.enc_norm.push_back(std::move(norm));
            cache.enc_act.push_back(act);
            if (l < l_count - 1) x = avgpool2(act);
        }

        // Endmember branch.
        cache.gap = global_avg_pool(cache.enc_act.back());
        cache.dense_out = params_[dense_w_].value * cache.gap + params_[dense_b_].value.col(0);
        Eigen::MatrixXd m_n(cfg_.endmembers, cfg_.bands);
        for (index_t e = 0; e < cfg_.endmembers; ++e)
            for (index_t b = 0; b < cfg_.bands; ++b)
                m_n(e, b) = softplus(cache.dense_out(e * cfg_.bands + b));
        result.m += m_n;
        result.m_patch.push_back(std::move(m_n));

        // Abundance branch: decoder with skip connections, then softmax.
        Tensor d = cache.enc_act.back();
        for (index_t k = 0; k < l_count - 1; ++k) {
            const index_t level = l_count - 2 - k;
            Tensor cat = concat_channels(upsample2(d), cache.enc_act[static_cast<std::size_t>(level)]);
            Tensor pre = conv3x3(cat, params_[dec_w_[static_cast<std::size_t>(k)]].value,
                                 params_[dec_b_[static_cast<std::size_t>(k)]].value.col(0));
            Tensor norm = instance_norm(pre);
            d = silu(norm);
            cache.dec_cat.push_back(std::move(cat));
            cache.dec_pre.push_back(std::move(pre));
            cache.dec_norm.push_back(std::move(norm));
            cache.dec_act.push_back(d);
        }
        cache.head_in = d;
        cache.head_pre = conv3x3(d, params_[head_w_].value, params_[head_b_].value.col(0));
        result.abundances.push_back(channel_softmax(cache.head_pre));
    }

    // Abundance-branch and encoder backward for one patch.
    void backward_patch(const Tensor& /*input*/, PatchCache& cache, const Tensor& abundance,
                        const Tensor& grad_abund) {
        const index_t l_count = cfg_.levels;

        std::vector<Tensor> grad_enc_act(static_cast<std::size_t>(l_count));
        for (index_t l = 0; l < l_count; ++l)
            grad_enc_act[static_cast<std::size_t>(l)] =
                Tensor(cache.enc_act[static_cast<std::size_t>(l)].h,
                       cache.enc_act[static_cast<std::size_t>(l)].w,
                       cache.enc_act[static_cast<std::size_t>(l)].c);

        // Softmax and head conv.
        const Tensor grad_head_pre = channel_softmax_backward(abundance, grad_abund);
        Tensor grad_d = conv3x3_backward(cache.head_in, params_[head_w_].value, grad_head_pre,
                                         params_[head_w_].grad, bias_grad(head_b_));

        // Decoder stages in reverse.
        for (index_t k = l_count - 2; k >= 0; --k) {
            const index_t level = l_count - 2 - k;
            const Tensor grad_norm = silu_backward(cache.dec_norm[static_cast<std::size_t>(k)], grad_d);
            const Tensor grad_pre =
                instance_norm_backward(cache.dec_pre[static_cast<std::size_t>(k)], grad_norm);
            const Tensor grad_cat =
                conv3x3_backward(cache.dec_cat[static_cast<std::size_t>(k)],
                                 params_[dec_w_[static_cast<std::size_t>(k)]].value, grad_pre,
                                 params_[dec_w_[static_cast<std::size_t>(k)]].grad,
                                 bias_grad(dec_b_[static_cast<std::size_t>(k)]));
            Tensor grad_up, grad_skip;
            split_channels_backward(grad_cat, cfg_.channels_at(level + 1), grad_up, grad_skip);
            grad_enc_act[static_cast<std::size_t>(level)].data += grad_skip.data;
            grad_d = upsample2_backward(grad_up);
        }
        grad_enc_act[static_cast<std::size_t>(l_count - 1)].data += grad_d.data;

        // Encoder stages in reverse; pooled gradients flow to the level below.
        for (index_t l = l_count - 1; l >= 0; --l) {
            const Tensor grad_act = std::move(grad_enc_act[static_cast<std::size_t>(l)]);
            const Tensor grad_norm = silu_backward(cache.enc_norm[static_cast<std::size_t>(l)], grad_act);
            const Tensor grad_pre =
                instance_norm_backward(cache.enc_pre[static_cast<std::size_t>(l)], grad_norm);
            const Tensor grad_in =
                conv3x3_backward(cache.enc_in[static_cast<std::size_t>(l)],
                                 params_[enc_w_[static_cast<std::size_t>(l)]].value, grad_pre,
                                 params_[enc_w_[static_cast<std::size_t>(l)]].grad,
                                 bias_grad(enc_b_[static_cast<std::size_t>(l)]));
            if (l > 0)
                grad_enc_act[static_cast<std::size_t>(l - 1)].data +=
                    avgpool2_backward(grad_in, cache.enc_act[static_cast<std::size_t>(l - 1)].h,
                                      cache.enc_act[static_cast<std::size_t>(l - 1)].w)
                        .data;
        }
    }

    // Endmember-branch backward for one patch. grad_m_patch is d(total)/d(M_n).
    void backward_endmember_branch(PatchCache& cache, const Eigen::MatrixXd& grad_m_patch) {
        Eigen::VectorXd grad_dense(cfg_.endmembers * cfg_.bands);
        for (index_t e = 0; e < cfg_.endmembers; ++e)
            for (index_t b = 0; b < cfg_.bands; ++b)
                grad_dense(e * cfg_.bands + b) =
                    grad_m_patch(e, b) * sigmoid(cache.dense_out(e * cfg_.bands + b));

        params_[dense_w_].grad.noalias() += grad_dense * cache.gap.transpose();
        params_[dense_b_].grad.col(0) += grad_dense;
        const Eigen::VectorXd grad_gap = params_[dense_w_].value.transpose() * grad_dense;

        const Tensor& deepest = cache.enc_act.back();
        Tensor grad_deep = global_avg_pool_backward(grad_gap, deepest.h, deepest.w);

        // This contribution joins the abundance-branch encoder backward, but
        // the branches only share the encoder; replaying the encoder chain for
        // this term keeps the two passes independent and equally exact.
        for (index_t l = cfg_.levels - 1; l >= 0; --l) {
            const Tensor grad_norm = silu_backward(cache.enc_norm[static_cast<std::size_t>(l)], grad_deep);
            const Tensor grad_pre =
                instance_norm_backward(cache.enc_pre[static_cast<std::size_t>(l)], grad_norm);
            const Tensor grad_in =
                conv3x3_backward(cache.enc_in[static_cast<std::size_t>(l)],
                                 params_[enc_w_[static_cast<std::size_t>(l)]].value, grad_pre,
                                 params_[enc_w_[static_cast<std::size_t>(l)]].grad,
                                 bias_grad(enc_b_[static_cast<std::size_t>(l)]));
            if (l > 0)
                grad_deep = avgpool2_backward(grad_in, cache.enc_act[static_cast<std::size_t>(l - 1)].h,
                                              cache.enc_act[static_cast<std::size_t>(l - 1)].w);
        }
    }

    // Bias gradients live in column 0 of the (c, 1) grad matrix.
    Eigen::Ref<Eigen::VectorXd> bias_grad(index_t idx) { return params_[idx].grad.col(0); }

    void check_finite(const LossComponents& lc) const {
        const std::pair<const char*, double> parts[] = {
            {"re", lc.re}, {"sad", lc.sad}, {"cos", lc.cos}, {"ref", lc.ref}, {"total", lc.total}};
        for (const auto& [name, value] : parts)
            if (!std::isfinite(value))
                throw NumericError(std::string("non-finite loss component: ") + name);
    }

    UnmixerConfig cfg_;
    ParamStore params_;
    index_t step_ = 0;
    Rng rng_;

    std::vector<index_t> enc_w_, enc_b_, dec_w_, dec_b_;
    index_t dense_w_ = -1, dense_b_ = -1, head_w_ = -1, head_b_ = -1;
};

}  // namespace unmix::nn
