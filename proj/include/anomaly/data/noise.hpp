#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "anomaly/core/rng.hpp"
#include "anomaly/data/image.hpp"

namespace anomaly {

struct NoisePlan {
    std::vector<std::size_t> selected_indices;  // ascending, indices into Dataset::samples
    double mean = 0.0;
    double variance = 0.001;
};

enum class NoiseScope { train, all };

struct NoiseOptions {
    double fraction = 0.10;
    double mean = 0.0;
    double variance = 0.001;
    NoiseScope scope = NoiseScope::train;
};

/// Perturb floor(fraction * K) distinct eligible samples with i.i.d. Gaussian
/// pixel noise, clamped back to [0,1]. K counts the eligible samples (the train
/// split unless scope is `all`). Other samples are left untouched.
inline std::pair<Dataset, NoisePlan> inject_gaussian_noise(const Dataset& ds, const NoiseOptions& opt,
                                                           std::uint64_t seed) {
    if (!(opt.fraction >= 0.0 && opt.fraction <= 1.0)) throw ConfigError("noise fraction must be in [0,1]");
    if (!(opt.variance >= 0.0)) throw ConfigError("noise variance must be non-negative");
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (opt.scope == NoiseScope::all || ds.samples[i].split == Split::train) eligible.push_back(i);
    }
    const auto k = static_cast<std::size_t>(std::floor(opt.fraction * static_cast<double>(eligible.size())));

    Rng pick(seed, "noise-select");
    // partial Fisher-Yates: the first k positions are a uniform k-subset
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(pick.uniform_int(static_cast<std::int64_t>(i),
                                                                 static_cast<std::int64_t>(eligible.size() - 1)));
        std::swap(eligible[i], eligible[j]);
    }
    NoisePlan plan{{eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(k)}, opt.mean, opt.variance};
    std::sort(plan.selected_indices.begin(), plan.selected_indices.end());

    Dataset out = ds;
    const double sigma = std::sqrt(opt.variance);
    for (std::size_t idx : plan.selected_indices) {
        Rng rng(seed, "noise-pixels", idx);
        for (auto& v : out.samples[idx].pixels.storage()) {
            v = static_cast<float>(std::clamp(static_cast<double>(v) + (sigma > 0.0 ? rng.normal(opt.mean, sigma) : opt.mean), 0.0, 1.0));
        }
    }
    return {std::move(out), std::move(plan)};
}

}  // namespace anomaly
