#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "anomaly/core/error.hpp"
#include "anomaly/core/rng.hpp"
#include "anomaly/nn/layer.hpp"
#include "anomaly/nn/ops.hpp"
#include "anomaly/nn/tensor.hpp"

namespace anomaly {

using ops::Mode;

template <class T>
struct LayerState {
    std::vector<Tensor<T>> params;   // trainable: weight, bias (or gamma, beta)
    std::vector<Tensor<T>> buffers;  // batchnorm running mean / variance

    bool operator==(const LayerState&) const = default;
};

/// An ordered layer stack with its parameters. `input` holds the per-sample
/// extents (n is ignored); `latent_layer` marks the bottleneck whose output
/// encode_latent returns.
template <class T>
struct ModelGraph {
    std::string tag;
    Shape input{1, 1, 1, 1};
    std::vector<LayerSpec> layers;
    std::vector<LayerState<T>> state;
    std::uint64_t seed = 0;
    std::optional<std::size_t> latent_layer;

    bool operator==(const ModelGraph&) const = default;
};

template <class T>
using Gradients = std::vector<std::vector<Tensor<T>>>;

/// Per-layer shapes for a single sample: entry 0 is the input, entry l+1 the output of layer l.
template <class T>
std::vector<Shape> layer_shapes(const ModelGraph<T>& model, std::size_t batch = 1) {
    std::vector<Shape> shapes;
    shapes.reserve(model.layers.size() + 1);
    Shape s{batch, model.input.c, model.input.h, model.input.w};
    shapes.push_back(s);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        try {
            s = output_shape(model.layers[l], s);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(l) + " (" + std::string(kind_name(kind_of(model.layers[l]))) +
                             "): " + e.what());
        }
        shapes.push_back(s);
    }
    return shapes;
}

namespace detail {

// Activation that consumes a weighted layer's output, skipping batchnorm/reshape.
inline std::optional<Act> following_activation(const std::vector<LayerSpec>& layers, std::size_t l) {
    for (std::size_t j = l + 1; j < layers.size(); ++j) {
        const LayerKind k = kind_of(layers[j]);
        if (k == LayerKind::activation) return std::get<Activation>(layers[j]).fn;
        if (k == LayerKind::batchnorm || k == LayerKind::reshape || k == LayerKind::flatten) continue;
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace detail

/// Allocate and initialize parameters. Weights feeding relu/leaky_relu get
/// He-uniform, everything else Xavier-uniform; biases start at zero. Each layer
/// draws from its own derived stream so the result depends only on the seed.
template <class T>
ModelGraph<T> build_model(std::string tag, Shape input, std::vector<LayerSpec> layers, std::uint64_t seed,
                          std::optional<std::size_t> latent_layer = std::nullopt) {
    ModelGraph<T> model;
    model.tag = std::move(tag);
    model.input = Shape{1, input.c, input.h, input.w};
    model.layers = std::move(layers);
    model.seed = seed;
    model.latent_layer = latent_layer;
    if (latent_layer && *latent_layer >= model.layers.size()) {
        throw ShapeError("latent layer index " + std::to_string(*latent_layer) + " out of range");
    }
    const auto shapes = layer_shapes(model);
    model.state.resize(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const LayerKind kind = kind_of(model.layers[l]);
        auto& st = model.state[l];
        if (kind == LayerKind::batchnorm) {
            const std::size_t c = shapes[l].c;
            st.params = {Tensor<T>(Shape{c, 1, 1, 1}, T(1)), Tensor<T>(Shape{c, 1, 1, 1}, T(0))};
            st.buffers = {Tensor<T>(Shape{c, 1, 1, 1}, T(0)), Tensor<T>(Shape{c, 1, 1, 1}, T(1))};
            continue;
        }
        const auto pshapes = parameter_shapes(model.layers[l], shapes[l]);
        if (pshapes.empty()) continue;
        Tensor<T> weights(pshapes[0]);
        Tensor<T> bias(pshapes[1]);
        std::size_t fan_in = 0, fan_out = 0;
        const Shape& ws = pshapes[0];
        switch (kind) {
            case LayerKind::conv2d:
                fan_in = ws.c * ws.h * ws.w;
                fan_out = ws.n * ws.h * ws.w;
                break;
            case LayerKind::conv2d_transpose:
                fan_in = ws.n * ws.h * ws.w;
                fan_out = ws.c * ws.h * ws.w;
                break;
            default:  // dense
                fan_in = ws.c;
                fan_out = ws.n;
                break;
        }
        const auto act = detail::following_activation(model.layers, l);
        const bool rectified = act && (*act == Act::relu || *act == Act::leaky_relu);
        const double limit = rectified ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                       : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Rng rng(seed, "init", l);
        for (auto& v : weights.storage()) v = static_cast<T>(rng.uniform(-limit, limit));
        st.params = {std::move(weights), std::move(bias)};
    }
    return model;
}

template <class T>
std::size_t parameter_count(const ModelGraph<T>& model) {
    std::size_t total = 0;
    for (const auto& st : model.state) {
        for (const auto& p : st.params) total += p.size();
    }
    return total;
}

template <class T>
Gradients<T> zero_gradients(const ModelGraph<T>& model) {
    Gradients<T> grads(model.state.size());
    for (std::size_t l = 0; l < model.state.size(); ++l) {
        for (const auto& p : model.state[l].params) grads[l].emplace_back(p.shape());
    }
    return grads;
}

template <class T>
struct ForwardCache {
    Mode mode = Mode::eval;
    std::vector<Tensor<T>> activations;  // input followed by every layer output
    std::vector<std::vector<std::size_t>> pool_argmax;
    std::vector<ops::BatchNormCache<T>> batchnorm;

    bool empty() const { return activations.empty(); }
};

/// Run layers [0, stop) in order (all layers by default). Pure with respect to
/// the model: batchnorm running statistics are only reported through the cache
/// and applied later by commit_batch_statistics().
template <class T>
Tensor<T> forward_model(const ModelGraph<T>& model, const Tensor<T>& input, Mode mode,
                        std::type_identity_t<ForwardCache<T>>* cache = nullptr, std::size_t stop = std::numeric_limits<std::size_t>::max()) {
    const Shape& s = input.shape();
    if (s.c != model.input.c || s.h != model.input.h || s.w != model.input.w) {
        throw ShapeError("model '" + model.tag + "' expects per-sample input (" + std::to_string(model.input.c) + "," +
                         std::to_string(model.input.h) + "," + std::to_string(model.input.w) + "), got " + s.str());
    }
    const std::size_t count = std::min(stop, model.layers.size());
    if (cache) {
        cache->mode = mode;
        cache->activations.clear();
        cache->activations.reserve(count + 1);
        cache->activations.push_back(input);
        cache->pool_argmax.assign(count, {});
        cache->batchnorm.assign(count, {});
    }
    Tensor<T> x = input;
    for (std::size_t l = 0; l < count; ++l) {
        const auto& spec = model.layers[l];
        const auto& st = model.state[l];
        Tensor<T> y;
        try {
            switch (kind_of(spec)) {
                case LayerKind::conv2d: {
                    const auto& c = std::get<Conv2d>(spec);
                    y = ops::conv2d_forward(x, st.params[0], st.params[1], c.stride, c.padding);
                    break;
                }
                case LayerKind::conv2d_transpose: {
                    const auto& c = std::get<Conv2dTranspose>(spec);
                    y = ops::conv2d_transpose_forward(x, st.params[0], st.params[1], c.stride, c.padding);
                    break;
                }
                case LayerKind::maxpool2d:
                    y = ops::maxpool2d_forward(x, std::get<MaxPool2d>(spec).odd,
                                               cache ? &cache->pool_argmax[l] : nullptr);
                    break;
                case LayerKind::dense:
                    y = ops::dense_forward(x, st.params[0], st.params[1]);
                    break;
                case LayerKind::activation:
                    y = ops::activate(x, std::get<Activation>(spec).fn);
                    break;
                case LayerKind::batchnorm:
                    y = ops::batchnorm_forward(x, st.params[0], st.params[1], st.buffers[0], st.buffers[1],
                                               std::get<BatchNorm>(spec).eps, mode,
                                               cache ? &cache->batchnorm[l] : nullptr);
                    break;
                case LayerKind::flatten:
                case LayerKind::reshape:
                    y = std::move(x).reshaped(output_shape(spec, x.shape()));
                    break;
            }
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(l) + " (" + std::string(kind_name(kind_of(spec))) +
                             "): " + e.what());
        }
        if (cache) cache->activations.push_back(y);
        x = std::move(y);
    }
    return x;
}

template <class T>
struct BackwardResult {
    Gradients<T> params;
    Tensor<T> input;
};

/// Backpropagate `output_grad` (dL/d output) through the layers cached by forward_model.
template <class T>
BackwardResult<T> backward_model(const ModelGraph<T>& model, const ForwardCache<T>& cache, const Tensor<T>& output_grad) {
    const std::size_t count = cache.activations.empty() ? 0 : cache.activations.size() - 1;
    if (cache.empty() || count != model.layers.size()) {
        throw ShapeError("backward_model: no complete forward cache for model '" + model.tag + "'");
    }
    if (!(output_grad.shape() == cache.activations.back().shape())) {
        throw ShapeError("backward_model: gradient shape " + output_grad.shape().str() + " != output shape " +
                         cache.activations.back().shape().str());
    }
    BackwardResult<T> result{zero_gradients(model), {}};
    Tensor<T> grad = output_grad;
    for (std::size_t l = count; l-- > 0;) {
        const auto& spec = model.layers[l];
        const auto& st = model.state[l];
        const Tensor<T>& x = cache.activations[l];
        auto& g = result.params[l];
        switch (kind_of(spec)) {
            case LayerKind::conv2d: {
                const auto& c = std::get<Conv2d>(spec);
                grad = ops::conv2d_backward(x, st.params[0], c.stride, c.padding, grad, g[0], g[1]);
                break;
            }
            case LayerKind::conv2d_transpose: {
                const auto& c = std::get<Conv2dTranspose>(spec);
                grad = ops::conv2d_transpose_backward(x, st.params[0], c.stride, c.padding, grad, g[0], g[1]);
                break;
            }
            case LayerKind::maxpool2d:
                grad = ops::maxpool2d_backward(x.shape(), cache.pool_argmax[l], grad);
                break;
            case LayerKind::dense:
                grad = ops::dense_backward(x, st.params[0], grad, g[0], g[1]);
                break;
            case LayerKind::activation:
                grad = ops::activate_backward(x, cache.activations[l + 1], grad, std::get<Activation>(spec).fn);
                break;
            case LayerKind::batchnorm:
                grad = ops::batchnorm_backward(grad, cache.batchnorm[l], st.params[0], cache.mode, g[0], g[1]);
                break;
            case LayerKind::flatten:
            case LayerKind::reshape:
                grad = std::move(grad).reshaped(x.shape());
                break;
        }
    }
    result.input = std::move(grad);
    return result;
}

/// Fold the batch statistics of a train-mode forward pass into the running estimates.
template <class T>
void commit_batch_statistics(ModelGraph<T>& model, const ForwardCache<T>& cache) {
    if (cache.mode != Mode::train) return;
    for (std::size_t l = 0; l < cache.batchnorm.size() && l < model.layers.size(); ++l) {
        if (kind_of(model.layers[l]) != LayerKind::batchnorm) continue;
        const auto& bc = cache.batchnorm[l];
        if (bc.batch_mean.empty()) continue;
        const double m = std::get<BatchNorm>(model.layers[l]).momentum;
        auto& mean = model.state[l].buffers[0];
        auto& var = model.state[l].buffers[1];
        for (std::size_t c = 0; c < mean.size(); ++c) {
            mean[c] = static_cast<T>((1.0 - m) * mean[c] + m * bc.batch_mean[c]);
            var[c] = static_cast<T>((1.0 - m) * var[c] + m * bc.batch_var[c]);
        }
    }
}

template <class T>
std::size_t count_layers(const ModelGraph<T>& model, LayerKind kind) {
    std::size_t n = 0;
    for (const auto& l : model.layers) n += kind_of(l) == kind ? 1 : 0;
    return n;
}

}  // namespace anomaly
