#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include "anomaly/core/error.hpp"
#include "anomaly/nn/tensor.hpp"

namespace anomaly {

enum class Act : std::uint8_t { relu, leaky_relu, sigmoid, tanh };

inline constexpr double kLeakySlope = 0.2;

inline std::string_view to_string(Act a) {
    switch (a) {
        case Act::relu: return "relu";
        case Act::leaky_relu: return "leaky_relu";
        case Act::sigmoid: return "sigmoid";
        case Act::tanh: return "tanh";
    }
    return "?";
}

inline Act parse_activation(std::string_view name) {
    if (name == "relu") return Act::relu;
    if (name == "leaky_relu") return Act::leaky_relu;
    if (name == "sigmoid") return Act::sigmoid;
    if (name == "tanh") return Act::tanh;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

// How 2x2 max pooling treats an odd extent.
enum class OddPolicy : std::uint8_t {
    error,  // refuse
    pad,    // implicit -inf row/column at the bottom/right (ceil)
    crop,   // drop the last row/column (floor)
};

struct Conv2d {
    std::size_t out_channels = 1;
    std::size_t kernel_h = 3;
    std::size_t kernel_w = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;
    bool operator==(const Conv2d&) const = default;
};

/// Weights are stored (InC, OutC, Kh, Kw): the same tensor a Conv2d mapping
/// OutC -> InC would use, which makes this layer its exact adjoint.
struct Conv2dTranspose {
    std::size_t out_channels = 1;
    std::size_t kernel_h = 2;
    std::size_t kernel_w = 2;
    std::size_t stride = 2;
    std::size_t padding = 0;
    bool operator==(const Conv2dTranspose&) const = default;
};

struct MaxPool2d {
    OddPolicy odd = OddPolicy::error;
    bool operator==(const MaxPool2d&) const = default;
};

struct Dense {
    std::size_t units = 1;
    bool operator==(const Dense&) const = default;
};

struct Activation {
    Act fn = Act::relu;
    bool operator==(const Activation&) const = default;
};

struct BatchNorm {
    double momentum = 0.1;
    double eps = 1e-5;
    bool operator==(const BatchNorm&) const = default;
};

struct Flatten {
    bool operator==(const Flatten&) const = default;
};

struct Reshape {
    std::size_t c = 1;
    std::size_t h = 1;
    std::size_t w = 1;
    bool operator==(const Reshape&) const = default;
};

using LayerSpec = std::variant<Conv2d, Conv2dTranspose, MaxPool2d, Dense, Activation, BatchNorm, Flatten, Reshape>;

enum class LayerKind : std::uint8_t {
    conv2d = 0,
    conv2d_transpose = 1,
    maxpool2d = 2,
    dense = 3,
    activation = 4,
    batchnorm = 5,
    flatten = 6,
    reshape = 7,
};

inline LayerKind kind_of(const LayerSpec& spec) { return static_cast<LayerKind>(spec.index()); }

inline std::string_view kind_name(LayerKind k) {
    constexpr std::string_view names[] = {"conv2d", "conv2d_transpose", "maxpool2d", "dense",
                                          "activation", "batchnorm", "flatten", "reshape"};
    return names[static_cast<std::size_t>(k)];
}

// Output extent of a strided window sweep; throws if the window never fits.
inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                                   std::string_view dim) {
    if (kernel < 1 || stride < 1) throw ShapeError("kernel and stride must be >= 1");
    if (in + 2 * pad < kernel) {
        throw ShapeError(std::string(dim) + " extent " + std::to_string(in) + " (+2*" + std::to_string(pad) +
                         " padding) is smaller than kernel " + std::to_string(kernel));
    }
    return (in + 2 * pad - kernel) / stride + 1;
}

inline std::size_t conv_transpose_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad,
                                             std::string_view dim) {
    if (kernel < 1 || stride < 1) throw ShapeError("kernel and stride must be >= 1");
    if (in < 1) throw ShapeError(std::string(dim) + " extent must be >= 1");
    const std::size_t full = (in - 1) * stride + kernel;
    if (full <= 2 * pad) {
        throw ShapeError(std::string(dim) + " transpose output would be empty (padding " + std::to_string(pad) + ")");
    }
    return full - 2 * pad;
}

inline std::size_t pool_out_extent(std::size_t in, OddPolicy odd, std::string_view dim) {
    if (in % 2 == 0) return in / 2;
    switch (odd) {
        case OddPolicy::pad: return in / 2 + 1;
        case OddPolicy::crop:
            if (in < 2) throw ShapeError(std::string(dim) + " extent 1 cannot be cropped for pooling");
            return in / 2;
        case OddPolicy::error: break;
    }
    throw ShapeError("maxpool2d: odd " + std::string(dim) + " extent " + std::to_string(in) +
                     " (enable odd-extent padding or cropping)");
}

/// Output shape of one layer given its input shape.
inline Shape output_shape(const LayerSpec& spec, const Shape& in) {
    struct Visitor {
        const Shape& in;
        Shape operator()(const Conv2d& l) const {
            if (l.out_channels < 1) throw ShapeError("conv2d: out_channels must be >= 1");
            return {in.n, l.out_channels, conv_out_extent(in.h, l.kernel_h, l.stride, l.padding, "height"),
                    conv_out_extent(in.w, l.kernel_w, l.stride, l.padding, "width")};
        }
        Shape operator()(const Conv2dTranspose& l) const {
            if (l.out_channels < 1) throw ShapeError("conv2d_transpose: out_channels must be >= 1");
            return {in.n, l.out_channels, conv_transpose_out_extent(in.h, l.kernel_h, l.stride, l.padding, "height"),
                    conv_transpose_out_extent(in.w, l.kernel_w, l.stride, l.padding, "width")};
        }
        Shape operator()(const MaxPool2d& l) const {
            return {in.n, in.c, pool_out_extent(in.h, l.odd, "height"), pool_out_extent(in.w, l.odd, "width")};
        }
        Shape operator()(const Dense& l) const {
            if (l.units < 1) throw ShapeError("dense: units must be >= 1");
            return {in.n, l.units, 1, 1};
        }
        Shape operator()(const Activation&) const { return in; }
        Shape operator()(const BatchNorm&) const { return in; }
        Shape operator()(const Flatten&) const { return {in.n, in.per_sample(), 1, 1}; }
        Shape operator()(const Reshape& l) const {
            if (l.c * l.h * l.w != in.per_sample()) {
                throw ShapeError("reshape: " + std::to_string(in.per_sample()) + " elements per sample cannot become (" +
                                 std::to_string(l.c) + "," + std::to_string(l.h) + "," + std::to_string(l.w) + ")");
            }
            return {in.n, l.c, l.h, l.w};
        }
    };
    return std::visit(Visitor{in}, spec);
}

/// Shapes of the trainable parameter tensors of a layer with the given input shape.
inline std::vector<Shape> parameter_shapes(const LayerSpec& spec, const Shape& in) {
    switch (kind_of(spec)) {
        case LayerKind::conv2d: {
            const auto& l = std::get<Conv2d>(spec);
            return {{l.out_channels, in.c, l.kernel_h, l.kernel_w}, {l.out_channels, 1, 1, 1}};
        }
        case LayerKind::conv2d_transpose: {
            const auto& l = std::get<Conv2dTranspose>(spec);
            return {{in.c, l.out_channels, l.kernel_h, l.kernel_w}, {l.out_channels, 1, 1, 1}};
        }
        case LayerKind::dense: {
            const auto& l = std::get<Dense>(spec);
            return {{l.units, in.per_sample(), 1, 1}, {l.units, 1, 1, 1}};
        }
        case LayerKind::batchnorm:
            return {{in.c, 1, 1, 1}, {in.c, 1, 1, 1}};  // gamma, beta
        default:
            return {};
    }
}

}  // namespace anomaly
