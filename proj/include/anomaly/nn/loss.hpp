#pragma once

#include <algorithm>
#include <cmath>

#include "anomaly/core/error.hpp"
#include "anomaly/nn/tensor.hpp"

namespace anomaly {

enum class LossKind { mse, bce };

inline constexpr double kBceEpsilon = 1e-7;

template <class T>
struct LossResult {
    double value = 0.0;
    Tensor<T> grad;  // dL/d prediction
};

/// Mean over all elements. bce clamps predictions to [eps, 1-eps].
template <class T>
LossResult<T> loss_eval(const Tensor<T>& prediction, const Tensor<T>& target, LossKind kind) {
    if (!(prediction.shape() == target.shape())) {
        throw ShapeError("loss: prediction shape " + prediction.shape().str() + " != target shape " +
                         target.shape().str());
    }
    const std::size_t m = prediction.size();
    LossResult<T> out{0.0, Tensor<T>(prediction.shape())};
    if (m == 0) return out;
    const double inv = 1.0 / static_cast<double>(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double p = prediction[i];
        const double t = target[i];
        if (kind == LossKind::mse) {
            const double d = p - t;
            total += d * d;
            out.grad[i] = static_cast<T>(2.0 * d * inv);
        } else {
            const double pc = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
            total += -(t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc));
            out.grad[i] = static_cast<T>((pc - t) / (pc * (1.0 - pc)) * inv);
        }
    }
    out.value = total * inv;
    return out;
}

}  // namespace anomaly
