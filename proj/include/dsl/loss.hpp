#pragma once

#include <algorithm>
#include <cmath>

#include "dsl/core.hpp"

namespace dsl {

struct LossWeights {
    double w_sem = 10.0;
    double w_off = 0.1;
    double w_cnf = 20.0;
    double w_loc = 10.0;
    double w_sig = 10.0;
};

struct LossBreakdown {
    double sem = 0.0;
    double off = 0.0;
    double cnf = 0.0;
    double loc = 0.0;
    double sig = 0.0;
    double total = 0.0;
};

namespace detail {

constexpr double kBceEps = 1e-7;

// Each log argument is clamped at kBceEps, so a perfect 0/1 prediction
// contributes exactly zero.
inline double bce(double target, double pred) {
    return -(target * std::log(std::max(pred, kBceEps)) +
             (1.0 - target) * std::log(std::max(1.0 - pred, kBceEps)));
}

// Derivative of bce w.r.t. the prediction; each term flattens where its
// clamp is active.
inline double bce_grad(double target, double pred) {
    double g = 0.0;
    if (pred > kBceEps) g -= target / pred;
    if (1.0 - pred > kBceEps) g += (1.0 - target) / (1.0 - pred);
    return g;
}

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline void check_same_size(std::size_t a, std::size_t b) {
    if (a != b) throw DomainError("loss input shape mismatch");
}

}  // namespace detail

// Mean binary cross-entropy over all high-res pixels.
inline double loss_sem(const std::vector<double>& pred,
                       const std::vector<double>& target) {
    detail::check_same_size(pred.size(), target.size());
    if (pred.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        sum += detail::bce(target[i], pred[i]);
    return sum / pred.size();
}

// Mean squared offset residual over all high-res pixels.
inline double loss_off(const std::vector<Vec2>& pred,
                       const std::vector<Vec2>& target) {
    detail::check_same_size(pred.size(), target.size());
    if (pred.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        sum += (pred[i] - target[i]).norm2();
    return sum / pred.size();
}

// Sum of binary cross-entropies over all cells of all keypoint-types.
inline double loss_cnf(const std::array<std::vector<double>, kNumTypes>& pred,
                       const std::array<std::vector<double>, kNumTypes>& target) {
    double sum = 0.0;
    for (int k = 0; k < kNumTypes; ++k) {
        detail::check_same_size(pred[k].size(), target[k].size());
        for (std::size_t i = 0; i < pred[k].size(); ++i)
            sum += detail::bce(target[k][i], pred[k][i]);
    }
    return sum;
}

// Sum of absolute sigma errors over supervised cells (target conf == 1).
inline double loss_sig(const std::array<std::vector<double>, kNumTypes>& pred_sigma,
                       const std::array<std::vector<double>, kNumTypes>& target_sigma,
                       const std::array<std::vector<double>, kNumTypes>& target_conf) {
    double sum = 0.0;
    for (int k = 0; k < kNumTypes; ++k) {
        detail::check_same_size(pred_sigma[k].size(), target_sigma[k].size());
        detail::check_same_size(pred_sigma[k].size(), target_conf[k].size());
        for (std::size_t i = 0; i < pred_sigma[k].size(); ++i)
            if (target_conf[k][i] == 1.0)
                sum += std::abs(pred_sigma[k][i] - target_sigma[k][i]);
    }
    return sum;
}

// Scale-weighted localization loss over supervised cells:
// ||residual||^2 / B^2 + log(B), with B given in log-space.
inline double loss_loc(const std::array<std::vector<Vec2>, kNumTypes>& pred_loc,
                       const std::array<std::vector<Vec2>, kNumTypes>& target_loc,
                       const std::array<std::vector<double>, kNumTypes>& pred_log_scale,
                       const std::array<std::vector<double>, kNumTypes>& target_conf) {
    double sum = 0.0;
    for (int k = 0; k < kNumTypes; ++k) {
        detail::check_same_size(pred_loc[k].size(), target_loc[k].size());
        detail::check_same_size(pred_loc[k].size(), pred_log_scale[k].size());
        detail::check_same_size(pred_loc[k].size(), target_conf[k].size());
        for (std::size_t i = 0; i < pred_loc[k].size(); ++i) {
            if (target_conf[k][i] != 1.0) continue;
            const double b = pred_log_scale[k][i];
            const double r2 = (pred_loc[k][i] - target_loc[k][i]).norm2();
            sum += r2 * std::exp(-2.0 * b) + b;
        }
    }
    return sum;
}

inline LossBreakdown loss_total(const FieldSet& pred, const FieldSet& target,
                                const LossWeights& w = {}) {
    if (!(pred.grid == target.grid)) throw DomainError("loss grid mismatch");
    LossBreakdown out;
    out.sem = loss_sem(pred.semantic, target.semantic);
    out.off = loss_off(pred.offsets, target.offsets);
    out.cnf = loss_cnf(pred.conf, target.conf);
    std::array<std::vector<double>, kNumTypes> pred_sigma, target_sigma;
    for (int k = 0; k < kNumTypes; ++k) {
        pred_sigma[k] = pred.sigma_slice(k);
        target_sigma[k] = target.sigma_slice(k);
    }
    out.sig = loss_sig(pred_sigma, target_sigma, target.conf);
    out.loc = loss_loc(pred.loc, target.loc, pred.log_scale, target.conf);
    out.total = w.w_sem * out.sem + w.w_off * out.off + w.w_cnf * out.cnf +
                w.w_loc * out.loc + w.w_sig * out.sig;
    return out;
}

// Gradients of the weighted total w.r.t. the predicted tensors. Sigma is
// differentiated in linear space, the localization scale in log space
// (matching how each enters the loss).
struct FieldGradients {
    std::vector<double> semantic;
    std::vector<Vec2> offsets;
    std::array<std::vector<double>, kNumTypes> conf;
    std::array<std::vector<Vec2>, kNumTypes> loc;
    std::array<std::vector<double>, kNumTypes> sigma;
    std::array<std::vector<double>, kNumTypes> log_scale;
};

inline FieldGradients grad_total(const FieldSet& pred, const FieldSet& target,
                                 const LossWeights& w = {}) {
    if (!(pred.grid == target.grid)) throw DomainError("loss grid mismatch");
    FieldGradients g;
    const std::size_t num_px = pred.semantic.size();

    g.semantic.assign(num_px, 0.0);
    for (std::size_t i = 0; i < num_px; ++i)
        g.semantic[i] =
            w.w_sem * detail::bce_grad(target.semantic[i], pred.semantic[i]) / num_px;

    g.offsets.assign(num_px, Vec2{});
    for (std::size_t i = 0; i < num_px; ++i)
        g.offsets[i] = (pred.offsets[i] - target.offsets[i]) * (2.0 * w.w_off / num_px);

    for (int k = 0; k < kNumTypes; ++k) {
        const std::size_t n = pred.conf[k].size();
        g.conf[k].assign(n, 0.0);
        g.loc[k].assign(n, Vec2{});
        g.sigma[k].assign(n, 0.0);
        g.log_scale[k].assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            g.conf[k][i] = w.w_cnf * detail::bce_grad(target.conf[k][i], pred.conf[k][i]);
            if (target.conf[k][i] != 1.0) continue;
            const double b = pred.log_scale[k][i];
            const Vec2 residual = pred.loc[k][i] - target.loc[k][i];
            g.loc[k][i] = residual * (2.0 * w.w_loc * std::exp(-2.0 * b));
            g.log_scale[k][i] =
                w.w_loc * (1.0 - 2.0 * residual.norm2() * std::exp(-2.0 * b));
            g.sigma[k][i] =
                w.w_sig * detail::sign0(pred.sigma(k, i) - target.sigma(k, i));
        }
    }
    return g;
}

}  // namespace dsl
