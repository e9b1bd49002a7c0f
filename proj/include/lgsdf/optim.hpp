#pragma once

#include "lgsdf/field.hpp"

#include <cmath>

namespace lgsdf {

struct AdamConfig {
    double learning_rate = 0.0013;
    double weight_decay = 0.012;  ///< decoupled, multiplied by the learning rate
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool decay_biases = false;

    void validate() const {
        if (!(learning_rate > 0)) throw Error("optimizer.learning_rate must be > 0");
        if (weight_decay < 0) throw Error("optimizer.weight_decay must be >= 0");
        if (!(beta1 >= 0 && beta1 < 1)) throw Error("optimizer.beta1 must be in [0, 1)");
        if (!(beta2 >= 0 && beta2 < 1)) throw Error("optimizer.beta2 must be in [0, 1)");
        if (!(epsilon > 0)) throw Error("optimizer.epsilon must be > 0");
    }
};

template <typename S>
struct AdamState {
    AdamConfig config;
    FieldParams<S> first_moment;
    FieldParams<S> second_moment;
    long step = 0;

    static AdamState fresh(const FieldParams<S>& params, const AdamConfig& cfg) {
        AdamState s;
        s.config = cfg;
        s.first_moment = FieldParams<S>::zeros(params.embedding, params.network);
        s.second_moment = FieldParams<S>::zeros(params.embedding, params.network);
        return s;
    }
};

/// One Adam update with decoupled weight decay: parameters are first shrunk by
/// (1 - lr * decay), then moved by the bias-corrected Adam step.
template <typename S>
void adam_step(FieldParams<S>& params, const FieldParams<S>& grads, AdamState<S>& state) {
    if (!grads.same_shape(params) || !state.first_moment.same_shape(params))
        throw Error("adam_step: shape mismatch");
    if (!grads.all_finite()) throw Error("adam_step: non-finite gradient");
    const AdamConfig& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    const S b1 = static_cast<S>(c.beta1), b2 = static_cast<S>(c.beta2);
    const S step_scale = static_cast<S>(c.learning_rate / bc1);
    const S inv_sqrt_bc2 = static_cast<S>(1.0 / std::sqrt(bc2));
    const S eps = static_cast<S>(c.epsilon);
    const S shrink = static_cast<S>(1.0 - c.learning_rate * c.weight_decay);

    auto update = [&](auto& theta, const auto& g, auto& m, auto& v, bool decay) {
        m.array() = b1 * m.array() + (S(1) - b1) * g.array();
        v.array() = b2 * v.array() + (S(1) - b2) * g.array().square();
        if (decay) theta.array() *= shrink;
        theta.array() -= step_scale * m.array() / (v.array().sqrt() * inv_sqrt_bc2 + eps);
    };
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        update(params.layers[i].weight, grads.layers[i].weight, state.first_moment.layers[i].weight,
               state.second_moment.layers[i].weight, true);
        update(params.layers[i].bias, grads.layers[i].bias, state.first_moment.layers[i].bias,
               state.second_moment.layers[i].bias, c.decay_biases);
    }
}

}  // namespace lgsdf
