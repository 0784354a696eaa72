#pragma once

#include <algorithm>

#include "anomaly/nn/loss.hpp"
#include "anomaly/nn/model.hpp"
#include "reference.hpp"

namespace oracle {

struct GradCheck {
    double params = 0.0;  // worst relative error over all parameter tensors
    double input = 0.0;   // worst relative error of dL/d input
    double worst() const { return std::max(params, input); }
};

/// Compare backward_model against central differences of loss(forward(x)).
inline GradCheck gradient_check(anomaly::ModelGraph<double>& model, anomaly::Tensor<double> input,
                                const anomaly::Tensor<double>& target, anomaly::LossKind loss,
                                anomaly::Mode mode = anomaly::Mode::train, double h = 1e-4) {
    using namespace anomaly;
    auto objective = [&] { return loss_eval(forward_model(model, input, mode), target, loss).value; };

    ForwardCache<double> cache;
    const auto out = forward_model(model, input, mode, &cache);
    const auto lr = loss_eval(out, target, loss);
    const auto analytic = backward_model(model, cache, lr.grad);

    GradCheck result;
    for (std::size_t l = 0; l < model.state.size(); ++l) {
        for (std::size_t k = 0; k < model.state[l].params.size(); ++k) {
            const auto numeric = numeric_gradient(model.state[l].params[k], objective, h);
            result.params = std::max(result.params, max_relative_error(numeric, analytic.params[l][k]));
        }
    }
    const auto numeric_input = numeric_gradient(input, objective, h);
    result.input = max_relative_error(numeric_input, analytic.input);
    return result;
}


struct GradInstance {
    anomaly::ModelGraph<double> model;
    anomaly::Tensor<double> input;
    anomaly::Tensor<double> target;
    anomaly::Mode mode = anomaly::Mode::train;
};

/// A random single-layer model of the given kind with extents <= 5, an input
/// kept away from activation kinks and pooling ties, and an mse target.
inline GradInstance random_instance(anomaly::LayerKind kind, anomaly::Rng& rng) {
    using namespace anomaly;
    auto pick = [&](std::int64_t lo, std::int64_t hi) { return static_cast<std::size_t>(rng.uniform_int(lo, hi)); };
    const std::size_t n = pick(2, 3), c = pick(1, 3), h = pick(3, 5), w = pick(3, 5);
    Shape in{n, c, h, w};
    LayerSpec spec;
    Mode mode = Mode::train;
    switch (kind) {
        case LayerKind::conv2d: {
            const std::size_t k = pick(1, 3);
            spec = Conv2d{pick(1, 3), k, pick(1, 3), pick(1, 2), pick(0, k - 1)};
            break;
        }
        case LayerKind::conv2d_transpose: {
            const std::size_t k = pick(1, 4);
            in.h = pick(2, 4), in.w = pick(2, 4);
            spec = Conv2dTranspose{pick(1, 3), k, k, pick(1, 2), pick(0, (k - 1) / 2)};
            break;
        }
        case LayerKind::maxpool2d:
            in.h = 2 * pick(1, 2), in.w = 2 * pick(1, 2);
            spec = MaxPool2d{};
            break;
        case LayerKind::dense:
            spec = Dense{pick(1, 5)};
            break;
        case LayerKind::activation:
            spec = Activation{static_cast<Act>(pick(0, 3))};
            break;
        case LayerKind::batchnorm:
            spec = BatchNorm{};
            mode = rng.uniform() < 0.75 ? Mode::train : Mode::eval;
            break;
        case LayerKind::flatten:
            spec = Flatten{};
            break;
        case LayerKind::reshape:
            spec = Reshape{in.w, in.c, in.h};
            break;
    }
    GradInstance inst{build_model<double>("gradcheck", in, {spec}, rng()), Tensor<double>(in), {}, mode};
    // Randomize every parameter (including zero-initialized biases and batchnorm affine terms).
    for (auto& st : inst.model.state) {
        for (auto& p : st.params)
            for (auto& v : p.storage()) v = rng.uniform(-1.0, 1.0);
        if (!st.buffers.empty()) {
            for (auto& v : st.buffers[0].storage()) v = rng.uniform(-0.5, 0.5);
            for (auto& v : st.buffers[1].storage()) v = rng.uniform(0.5, 2.0);
        }
    }
    if (kind == LayerKind::maxpool2d) {
        // distinct values on a 0.01 lattice so no window has a near-tie
        std::vector<double> vals(in.size());
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * static_cast<double>(i) - 0.3;
        std::shuffle(vals.begin(), vals.end(), rng);
        inst.input = Tensor<double>(in, std::move(vals));
    } else {
        for (auto& v : inst.input.storage()) {
            const double mag = rng.uniform(0.05, 1.5);
            v = rng.uniform() < 0.5 ? -mag : mag;
        }
    }
    const Shape out = forward_model(inst.model, inst.input, mode).shape();
    inst.target = random_tensor<double>(out, rng);
    return inst;
}

}  // namespace oracle
