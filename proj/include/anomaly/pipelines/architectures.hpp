#pragma once

#include <array>
#include <bit>
#include <string>
#include <vector>

#include "anomaly/nn/model.hpp"

namespace anomaly {

struct CnnConfig {
    std::size_t channels = 3;
    std::size_t size = 200;
    std::size_t blocks = 5;
    std::size_t filters = 16;
    std::size_t hidden_units = 64;
};

struct KdCaeConfig {
    std::size_t channels = 1;
    std::size_t size = 128;
    std::size_t base_filters = 32;  // encoder widths f, f, 2f, 2f, 4f, 4f
    std::size_t latent_extent = 8;  // spatial side of the bottleneck
};

struct NiCaeConfig {
    std::size_t channels = 1;
    std::size_t size = 128;
    std::vector<std::size_t> filters = {128, 64, 16, 8, 4};
    std::size_t bottleneck = 512;
};

inline constexpr std::size_t kKdCaeDepth = 6;

/// blocks x [conv3x3 + relu + maxpool2x2 (floor)], flatten, dense(hidden, relu), dense(1, sigmoid)
template <class T = float>
ModelGraph<T> build_cnn(const CnnConfig& cfg, std::uint64_t seed) {
    if (cfg.channels == 0 || cfg.filters == 0 || cfg.hidden_units == 0 || cfg.blocks == 0) {
        throw ConfigError("cnn: channels, filters, hidden_units and blocks must be positive");
    }
    if ((cfg.size >> cfg.blocks) == 0) {
        throw ConfigError("cnn: input size " + std::to_string(cfg.size) + " too small for " +
                          std::to_string(cfg.blocks) + " pooling stages");
    }
    std::vector<LayerSpec> layers;
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        layers.push_back(Conv2d{cfg.filters, 3, 3, 1, 1});
        layers.push_back(Activation{Act::relu});
        layers.push_back(MaxPool2d{OddPolicy::crop});
    }
    layers.push_back(Flatten{});
    layers.push_back(Dense{cfg.hidden_units});
    layers.push_back(Activation{Act::relu});
    layers.push_back(Dense{1});
    layers.push_back(Activation{Act::sigmoid});
    return build_model<T>("cnn", Shape{1, cfg.channels, cfg.size, cfg.size}, std::move(layers), seed);
}

/// Encoder layer indices (0..5) that downsample, for `halvings` stride-2 layers.
/// Odd positions first so that three halvings give strict conv / strided-conv pairs.
inline std::vector<bool> kd_cae_strides(std::size_t halvings) {
    static constexpr std::array<std::size_t, kKdCaeDepth> order = {1, 3, 5, 0, 2, 4};
    if (halvings > kKdCaeDepth) throw ConfigError("kd-cae: more than 6 halvings requested");
    std::vector<bool> strided(kKdCaeDepth, false);
    for (std::size_t i = 0; i < halvings; ++i) strided[order[i]] = true;
    return strided;
}

/// Six conv layers down to latent_extent x latent_extent, mirrored by six
/// layers back up (transpose conv where the encoder strided). The latent is
/// the activated output of the last encoder layer.
template <class T = float>
ModelGraph<T> build_kd_cae(const KdCaeConfig& cfg, std::uint64_t seed) {
    if (cfg.channels == 0 || cfg.base_filters == 0 || cfg.latent_extent == 0) {
        throw ConfigError("kd-cae: channels, base_filters and latent_extent must be positive");
    }
    if (cfg.size % cfg.latent_extent != 0 || !std::has_single_bit(cfg.size / cfg.latent_extent)) {
        throw ConfigError("kd-cae: input size " + std::to_string(cfg.size) + " must be latent_extent * 2^k");
    }
    const auto halvings = static_cast<std::size_t>(std::countr_zero(cfg.size / cfg.latent_extent));
    const auto strided = kd_cae_strides(halvings);
    const std::size_t f = cfg.base_filters;
    const std::array<std::size_t, kKdCaeDepth + 1> widths = {cfg.channels, f, f, 2 * f, 2 * f, 4 * f, 4 * f};

    std::vector<LayerSpec> layers;
    for (std::size_t i = 0; i < kKdCaeDepth; ++i) {
        layers.push_back(Conv2d{widths[i + 1], 3, 3, strided[i] ? 2u : 1u, 1});
        layers.push_back(Activation{Act::relu});
    }
    const std::size_t latent = layers.size() - 1;
    for (std::size_t j = 0; j < kKdCaeDepth; ++j) {
        const std::size_t i = kKdCaeDepth - 1 - j;
        if (strided[i]) {
            layers.push_back(Conv2dTranspose{widths[i], 4, 4, 2, 1});
        } else {
            layers.push_back(Conv2d{widths[i], 3, 3, 1, 1});
        }
        layers.push_back(Activation{i == 0 ? Act::sigmoid : Act::relu});
    }
    return build_model<T>("kd-cae", Shape{1, cfg.channels, cfg.size, cfg.size}, std::move(layers), seed, latent);
}

/// Five conv3x3 + relu + maxpool stages, flatten, dense bottleneck (relu),
/// dense back to the pooled volume, then one 4x4 stride-2 transpose conv per pool
/// with the filter sequence reversed and a final 1x1 conv with sigmoid.
template <class T = float>
ModelGraph<T> build_ni_cae(const NiCaeConfig& cfg, std::uint64_t seed) {
    if (cfg.channels == 0 || cfg.bottleneck == 0 || cfg.filters.empty()) {
        throw ConfigError("ni-cae: channels, bottleneck and filters must be non-empty");
    }
    for (std::size_t v : cfg.filters) {
        if (v == 0) throw ConfigError("ni-cae: filter counts must be positive");
    }
    const std::size_t stages = cfg.filters.size();
    if (cfg.size % (std::size_t{1} << stages) != 0) {
        throw ConfigError("ni-cae: input size " + std::to_string(cfg.size) + " must be divisible by 2^" +
                          std::to_string(stages));
    }
    const std::size_t side = cfg.size >> stages;
    const std::size_t last = cfg.filters.back();

    std::vector<LayerSpec> layers;
    for (std::size_t v : cfg.filters) {
        layers.push_back(Conv2d{v, 3, 3, 1, 1});
        layers.push_back(Activation{Act::relu});
        layers.push_back(MaxPool2d{});
    }
    layers.push_back(Flatten{});
    layers.push_back(Dense{cfg.bottleneck});
    layers.push_back(Activation{Act::relu});
    const std::size_t latent = layers.size() - 1;
    layers.push_back(Dense{last * side * side});
    layers.push_back(Activation{Act::relu});
    layers.push_back(Reshape{last, side, side});
    for (std::size_t s = stages; s-- > 0;) {
        layers.push_back(Conv2dTranspose{cfg.filters[s], 4, 4, 2, 1});
        layers.push_back(Activation{Act::relu});
    }
    layers.push_back(Conv2d{cfg.channels, 1, 1, 1, 0});
    layers.push_back(Activation{Act::sigmoid});
    return build_model<T>("ni-cae", Shape{1, cfg.channels, cfg.size, cfg.size}, std::move(layers), seed, latent);
}

/// Filter counts of the encoder convolutions, in order.
template <class T>
std::vector<std::size_t> encoder_filters(const ModelGraph<T>& model) {
    std::vector<std::size_t> out;
    const std::size_t stop = model.latent_layer ? *model.latent_layer : model.layers.size();
    for (std::size_t l = 0; l < stop; ++l) {
        if (const auto* c = std::get_if<Conv2d>(&model.layers[l])) out.push_back(c->out_channels);
    }
    return out;
}

}  // namespace anomaly
