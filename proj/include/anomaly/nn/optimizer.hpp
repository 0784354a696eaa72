#pragma once

#include <cmath>
#include <string>

#include "anomaly/core/error.hpp"
#include "anomaly/nn/model.hpp"

namespace anomaly {

enum class OptimizerKind { sgd, rmsprop };

template <class T>
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::rmsprop;
    double learning_rate = 1e-3;
    double rho = 0.9;
    double epsilon = 1e-8;
    Gradients<T> accumulators;  // mean squared gradient, allocated on first step
};

template <class T>
OptimizerState<T> make_optimizer(OptimizerKind kind, double learning_rate, double rho = 0.9, double epsilon = 1e-8) {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rmsprop decay must lie in (0,1)");
    return OptimizerState<T>{kind, learning_rate, rho, epsilon, {}};
}

/// sgd:     p -= lr * g
/// rmsprop: acc = rho*acc + (1-rho)*g^2;  p -= lr * g / sqrt(acc + eps)
template <class T>
void optimizer_step(OptimizerState<T>& state, ModelGraph<T>& model, const Gradients<T>& grads) {
    if (!(state.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (grads.size() != model.state.size()) throw ShapeError("optimizer: gradient/parameter layer count mismatch");
    if (state.kind == OptimizerKind::rmsprop && state.accumulators.empty()) state.accumulators = zero_gradients(model);
    const double lr = state.learning_rate;
    for (std::size_t l = 0; l < model.state.size(); ++l) {
        auto& params = model.state[l].params;
        if (grads[l].size() != params.size()) throw ShapeError("optimizer: gradient count mismatch at layer " + std::to_string(l));
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& p = params[k];
            const auto& g = grads[l][k];
            if (!(g.shape() == p.shape())) throw ShapeError("optimizer: gradient shape mismatch at layer " + std::to_string(l));
            if (state.kind == OptimizerKind::sgd) {
                for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<T>(p[i] - lr * g[i]);
            } else {
                auto& acc = state.accumulators[l][k];
                for (std::size_t i = 0; i < p.size(); ++i) {
                    const double gi = g[i];
                    const double a = state.rho * acc[i] + (1.0 - state.rho) * gi * gi;
                    acc[i] = static_cast<T>(a);
                    p[i] = static_cast<T>(p[i] - lr * gi / std::sqrt(a + state.epsilon));
                }
            }
        }
    }
}

}  // namespace anomaly
