#pragma once

// Training losses over fused grid cells. Each function returns the loss value
// and its derivative with respect to the network quantity it consumes.

#include "lgsdf/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace lgsdf {

struct LossConfig {
    double truncation = 0.10;      // T
    double beta = 5.0;
    double lambda_near = 3.38;
    double lambda_grad = 0.00018;
    double lambda_eik = 0.0268;
    int iterations = 10;           // N_I
    int n_history = 2048;          // history cells sampled per iteration
    bool use_current = true;
    bool use_history = true;
    bool grad_near_surface_only = false;

    void validate() const {
        if (!(truncation > 0)) throw Error("loss.truncation must be > 0");
        if (!(beta > 0)) throw Error("loss.beta must be > 0");
        if (lambda_near < 0) throw Error("loss.lambda_near must be >= 0");
        if (lambda_grad < 0) throw Error("loss.lambda_grad must be >= 0");
        if (lambda_eik < 0) throw Error("loss.lambda_eik must be >= 0");
        if (iterations < 1) throw Error("loss.iterations must be >= 1");
        if (n_history < 0) throw Error("loss.n_history must be >= 0");
        if (!use_current && !use_history)
            throw Error("loss: current and history grids cannot both be disabled");
    }
};

enum class CellSource { Current, History };

struct TrainItem {
    Vec3 position = Vec3::Zero();  ///< cell center
    double distance = 0.0;         ///< fused D
    Vec3 gradient = Vec3::UnitZ(); ///< fused G
    bool near_surface = false;     ///< |D| < T at selection time
    CellSource source = CellSource::Current;
};

using TrainBatch = std::vector<TrainItem>;

struct ValueAndSlope {
    double value = 0.0;
    double slope = 0.0;
};

/// Near-surface cells: weighted L1. Free-space cells: penalize predictions
/// above the fused bound or below zero.
inline ValueAndSlope sdf_loss(double pred, double distance, bool near_surface,
                              const LossConfig& cfg) {
    if (near_surface) {
        const double r = pred - distance;
        const double s = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
        return {cfg.lambda_near * std::abs(r), cfg.lambda_near * s};
    }
    const double e = std::exp(-cfg.beta * pred);
    const double neg_branch = e - 1.0;
    const double over_branch = pred - distance;
    ValueAndSlope out;
    if (neg_branch > out.value) out = {neg_branch, -cfg.beta * e};
    if (over_branch > out.value) out = {over_branch, 1.0};
    return out;
}

inline ValueAndSlope sdf_loss(double pred, double distance, const LossConfig& cfg) {
    return sdf_loss(pred, distance, std::abs(distance) < cfg.truncation, cfg);
}

struct ValueAndGradient {
    double value = 0.0;
    Vec3 gradient = Vec3::Zero();
};

inline constexpr double kCosineGuard = 1e-12;

/// Cosine distance between the predicted field gradient and the fused one.
inline ValueAndGradient grad_loss(const Vec3& pred_grad, const Vec3& target) {
    const double np = pred_grad.norm();
    const double nt = target.norm();
    const double denom = np * nt;
    ValueAndGradient out;
    if (!(denom > kCosineGuard)) {
        out.value = 1.0;
        return out;
    }
    const double dot = pred_grad.dot(target);
    out.value = 1.0 - dot / denom;
    out.gradient = -target / denom;
    out.gradient += (dot * nt / (denom * denom * np)) * pred_grad;
    return out;
}

/// Eikonal residual, applied only outside the truncation band.
inline ValueAndGradient eik_loss(const Vec3& pred_grad, bool free_space) {
    ValueAndGradient out;
    if (!free_space) return out;
    const double n = pred_grad.norm();
    out.value = std::abs(n - 1.0);
    if (n > 0 && n != 1.0) out.gradient = ((n > 1.0 ? 1.0 : -1.0) / n) * pred_grad;
    return out;
}

inline ValueAndGradient eik_loss(const Vec3& pred_grad, double distance, const LossConfig& cfg) {
    return eik_loss(pred_grad, std::abs(distance) >= cfg.truncation);
}

struct LossTerms {
    double total = 0.0;
    double sdf = 0.0;
    double grad = 0.0;
    double eik = 0.0;
};

/// Loss of one batch item with the derivatives with respect to the predicted
/// value and predicted gradient.
struct ItemLoss {
    LossTerms terms;
    double d_pred = 0.0;
    Vec3 d_grad = Vec3::Zero();
};

inline ItemLoss item_loss(double pred, const Vec3& pred_grad, const TrainItem& item,
                          const LossConfig& cfg) {
    ItemLoss out;
    const auto s = sdf_loss(pred, item.distance, item.near_surface, cfg);
    out.terms.sdf = s.value;
    out.d_pred = s.slope;
    if (!cfg.grad_near_surface_only || item.near_surface) {
        const auto g = grad_loss(pred_grad, item.gradient);
        out.terms.grad = g.value;
        out.d_grad += cfg.lambda_grad * g.gradient;
    }
    const auto e = eik_loss(pred_grad, !item.near_surface);
    out.terms.eik = e.value;
    out.d_grad += cfg.lambda_eik * e.gradient;
    out.terms.total = out.terms.sdf + cfg.lambda_grad * out.terms.grad + cfg.lambda_eik * out.terms.eik;
    return out;
}

}  // namespace lgsdf
