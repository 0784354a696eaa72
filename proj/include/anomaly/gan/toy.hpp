#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "anomaly/core/error.hpp"
#include "anomaly/core/rng.hpp"
#include "anomaly/pipelines/train.hpp"

namespace anomaly {

struct MixtureComponent {
    double weight = 1.0;
    double mean = 0.0;
    double stddev = 1.0;
};

/// 1-D Gaussian mixture with weights normalized at construction.
class GaussianMixture {
public:
    GaussianMixture() = default;
    explicit GaussianMixture(std::vector<MixtureComponent> parts) : parts_(std::move(parts)) {
        if (parts_.empty()) throw ConfigError("mixture needs at least one component");
        double total = 0.0;
        for (const auto& p : parts_) {
            if (!(p.weight > 0.0) || !(p.stddev > 0.0)) throw ConfigError("mixture weights and stddevs must be positive");
            total += p.weight;
        }
        for (auto& p : parts_) p.weight /= total;
    }

    double pdf(double x) const {
        double s = 0.0;
        for (const auto& p : parts_) {
            const double u = (x - p.mean) / p.stddev;
            s += p.weight * std::exp(-0.5 * u * u) / (p.stddev * std::sqrt(2.0 * std::numbers::pi));
        }
        return s;
    }

    double sample(Rng& rng) const {
        double u = rng.uniform();
        for (const auto& p : parts_) {
            if (u < p.weight) return rng.normal(p.mean, p.stddev);
            u -= p.weight;
        }
        return rng.normal(parts_.back().mean, parts_.back().stddev);
    }

    const std::vector<MixtureComponent>& components() const { return parts_; }

private:
    std::vector<MixtureComponent> parts_;
};

struct ToyDensityPair {
    GaussianMixture data;
    GaussianMixture model;
};

/// D*(x) = p_data / (p_data + p_model); 0.5 where both vanish.
inline double optimal_discriminator_oracle(const ToyDensityPair& toy, double x) {
    const double pd = toy.data.pdf(x), pm = toy.model.pdf(x);
    const double total = pd + pm;
    return total > 0.0 ? pd / total : 0.5;
}

/// n evenly spaced points covering [lo, hi] inclusive.
inline std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
    if (n < 2) throw ConfigError("grid needs at least two points");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

/// Trapezoid integral of a sampled function on a uniform grid.
inline double trapezoid(const std::vector<double>& grid, const std::vector<double>& values) {
    double s = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) s += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    return s;
}

struct ToyDiscriminatorConfig {
    std::size_t samples_per_side = 100000;
    std::size_t hidden = 16;
    std::size_t epochs = 8;
    std::size_t batch_size = 256;
    double learning_rate = 3e-3;
    std::uint64_t seed = 0;
};

/// Small MLP (two tanh hidden layers, sigmoid output) trained with BCE to tell
/// samples of p_data (label 1) from samples of p_model (label 0).
inline ModelGraph<float> train_toy_discriminator(const ToyDensityPair& toy, const ToyDiscriminatorConfig& cfg) {
    const std::size_t n = cfg.samples_per_side;
    if (n == 0) throw ConfigError("toy discriminator needs samples");
    Tensor<float> x(Shape{2 * n, 1, 1, 1}), y(Shape{2 * n, 1, 1, 1});
    Rng rd(cfg.seed, "toy-data"), rm(cfg.seed, "toy-model");
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<float>(toy.data.sample(rd));
        y[i] = 1.0f;
        x[n + i] = static_cast<float>(toy.model.sample(rm));
    }
    auto d = build_model<float>("toy-d", Shape{1, 1, 1, 1},
                                {Dense{cfg.hidden}, Activation{Act::tanh}, Dense{cfg.hidden}, Activation{Act::tanh},
                                 Dense{1}, Activation{Act::sigmoid}},
                                derive_seed(cfg.seed, "toy-init"));
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.loss = LossKind::bce;
    tc.patience = 0;
    tc.seed = cfg.seed;
    return train_model(std::move(d), x, y, nullptr, nullptr, tc).model;
}

/// Discriminator output at each grid point.
inline std::vector<double> evaluate_on_grid(const ModelGraph<float>& d, const std::vector<double>& grid) {
    Tensor<float> x(Shape{grid.size(), 1, 1, 1});
    for (std::size_t i = 0; i < grid.size(); ++i) x[i] = static_cast<float>(grid[i]);
    const auto y = forward_model(d, x, Mode::eval);
    return {y.values().begin(), y.values().end()};
}

}  // namespace anomaly
