#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "anomaly/core/rng.hpp"
#include "anomaly/data/image.hpp"

namespace anomaly {

/// Sizes of a shuffle-then-split partition: n_val = round(fraction * n), kept in [1, n-1].
inline std::size_t validation_count(std::size_t n, double fraction) {
    const auto raw = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(raw, 1, n - 1);
}

/// Shuffled sample order for `split_validation`; the last n_val positions form the validation set.
inline std::vector<std::size_t> validation_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed, "validation-split");
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

inline std::pair<Dataset, Dataset> split_validation(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must be in (0,1)");
    const std::size_t n = ds.samples.size();
    if (n < 2) throw DataError("too few samples to split off a validation set (need at least 2, have " +
                               std::to_string(n) + ")");
    const std::size_t n_val = validation_count(n, fraction);
    const auto order = validation_permutation(n, seed);
    Dataset train{ds.class_name, {}, ds.seed};
    Dataset val{ds.class_name, {}, ds.seed};
    for (std::size_t i = 0; i < n; ++i) {
        (i < n - n_val ? train : val).samples.push_back(ds.samples[order[i]]);
    }
    return {std::move(train), std::move(val)};
}

/// Partition for supervised training on a good-only-train layout: the good
/// training images plus all but `eval_fraction` of the labeled test images
/// train the classifier (relabeled as the train split); the held-out test
/// images evaluate it.
inline std::pair<std::vector<ImageSample>, std::vector<ImageSample>> supervised_partition(const Dataset& ds,
                                                                                         double eval_fraction,
                                                                                         std::uint64_t seed) {
    const Dataset train_part = ds.subset(Split::train), test_part = ds.subset(Split::test);
    auto [fit, held] = split_validation(test_part, eval_fraction, derive_seed(seed, "supervised-partition"));
    std::vector<ImageSample> train = train_part.samples;
    for (auto s : fit.samples) {
        s.split = Split::train;
        train.push_back(std::move(s));
    }
    return {std::move(train), std::move(held.samples)};
}

}  // namespace anomaly
