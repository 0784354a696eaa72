// Fit a discriminator to two 1-D Gaussian mixtures and print it next to the
// optimal p_data / (p_data + p_model).
#include <cstdio>

#include "anomaly/gan/toy.hpp"

using namespace anomaly;

int main() {
    const ToyDensityPair toy{GaussianMixture({{0.5, -1.5, 0.6}, {0.5, 1.0, 0.8}}), GaussianMixture({{1.0, 0.0, 1.5}})};
    ToyDiscriminatorConfig cfg;
    cfg.samples_per_side = 20000;
    const auto d = train_toy_discriminator(toy, cfg);
    const auto grid = linear_grid(-4.0, 4.0, 17);
    const auto out = evaluate_on_grid(d, grid);
    std::printf("%6s %10s %10s\n", "x", "D(x)", "D*(x)");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::printf("%6.2f %10.4f %10.4f\n", grid[i], out[i], optimal_discriminator_oracle(toy, grid[i]));
    }
}
