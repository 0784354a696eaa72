#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anomaly/data/image.hpp"
#include "anomaly/nn/model.hpp"
#include "anomaly/pipelines/kde.hpp"
#include "anomaly/pipelines/train.hpp"

namespace anomaly {

enum class CombineRule { recon_only, kde_only, either, both };

inline std::string_view to_string(CombineRule r) {
    switch (r) {
        case CombineRule::recon_only: return "recon_only";
        case CombineRule::kde_only: return "kde_only";
        case CombineRule::either: return "or";
        case CombineRule::both: return "and";
    }
    return "or";
}

inline CombineRule parse_combine_rule(std::string_view s) {
    if (s == "recon_only") return CombineRule::recon_only;
    if (s == "kde_only") return CombineRule::kde_only;
    if (s == "or") return CombineRule::either;
    if (s == "and") return CombineRule::both;
    throw ConfigError("unknown combine rule '" + std::string(s) + "' (expected recon_only, kde_only, or, and)");
}

inline bool uses_recon(CombineRule r) { return r != CombineRule::kde_only; }
inline bool uses_kde(CombineRule r) { return r != CombineRule::recon_only; }

struct ThresholdSet {
    double recon = 0.005;  // tau_re: defect when reconstruction error is above
    double kde = 0.0;      // tau_kd: defect when log density is below
    CombineRule rule = CombineRule::either;

    bool operator==(const ThresholdSet&) const = default;
};

struct AnomalyScore {
    double recon_error = 0.0;
    std::optional<double> kde_log_density;
    Label decision = Label::good;
};

/// Strict comparisons: a score exactly at its threshold does not fire.
inline Label decide_anomaly(double recon_error, std::optional<double> kde_log_density, const ThresholdSet& t) {
    const bool recon_flag = recon_error > t.recon;
    bool kde_flag = false;
    if (uses_kde(t.rule)) {
        if (!kde_log_density) throw ConfigError("combine rule '" + std::string(to_string(t.rule)) + "' needs a KDE score");
        kde_flag = *kde_log_density < t.kde;
    }
    bool defect = false;
    switch (t.rule) {
        case CombineRule::recon_only: defect = recon_flag; break;
        case CombineRule::kde_only: defect = kde_flag; break;
        case CombineRule::either: defect = recon_flag || kde_flag; break;
        case CombineRule::both: defect = recon_flag && kde_flag; break;
    }
    return defect ? Label::defect : Label::good;
}

/// Linear interpolation between closest ranks (rank = p/100 * (n-1)).
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw DataError("percentile of an empty set");
    if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("percentile must be in [0,100]");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return frac == 0.0 ? values[lo] : values[lo] + frac * (values[hi] - values[lo]);
}

/// tau_re = p-th percentile of the good-only validation errors, tau_kd = (100-p)-th
/// percentile of their log densities (skipped when no densities are given).
inline ThresholdSet calibrate_thresholds(const std::vector<double>& recon_errors,
                                         const std::vector<double>& log_densities, double p = 95.0,
                                         CombineRule rule = CombineRule::either) {
    if (recon_errors.empty()) throw DataError("calibrate_thresholds: empty validation set");
    ThresholdSet t;
    t.rule = rule;
    t.recon = percentile(recon_errors, p);
    if (uses_kde(rule)) {
        if (log_densities.size() != recon_errors.size()) {
            throw DataError("calibrate_thresholds: need one log density per validation image");
        }
        t.kde = percentile(log_densities, 100.0 - p);
    }
    return t;
}

// ---------------------------------------------------------------- model scoring

inline constexpr std::size_t kScoringBatch = 16;

/// Per-image mean squared difference between each input and its reconstruction.
template <class T>
std::vector<double> reconstruction_errors(const ModelGraph<T>& model, const Tensor<T>& images) {
    const std::size_t n = images.shape().n;
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t start = 0; start < n; start += kScoringBatch) {
        std::vector<std::size_t> idx(std::min(kScoringBatch, n - start));
        std::iota(idx.begin(), idx.end(), start);
        const auto x = gather_samples(images, idx);
        const auto y = forward_model(model, x, Mode::eval);
        if (!(y.shape() == x.shape())) {
            throw ShapeError("reconstruction shape " + y.shape().str() + " differs from input " + x.shape().str());
        }
        const std::size_t per = x.shape().per_sample();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto a = x.sample(i), b = y.sample(i);
            double s = 0.0;
            for (std::size_t k = 0; k < per; ++k) {
                const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
                s += d * d;
            }
            out.push_back(s / static_cast<double>(per));
        }
    }
    return out;
}

template <class T>
double reconstruction_error(const ModelGraph<T>& model, const Tensor<T>& image) {
    if (image.shape().n != 1) throw ShapeError("reconstruction_error expects a single image");
    return reconstruction_errors(model, image).front();
}

/// Flattened activations of the designated bottleneck layer, one row per image.
template <class T>
std::vector<std::vector<double>> encode_latents(const ModelGraph<T>& model, const Tensor<T>& images) {
    if (!model.latent_layer) throw ConfigError("model '" + model.tag + "' has no designated bottleneck layer");
    const std::size_t n = images.shape().n;
    std::vector<std::vector<double>> out;
    out.reserve(n);
    for (std::size_t start = 0; start < n; start += kScoringBatch) {
        std::vector<std::size_t> idx(std::min(kScoringBatch, n - start));
        std::iota(idx.begin(), idx.end(), start);
        const auto z = forward_model(model, gather_samples(images, idx), Mode::eval, nullptr, *model.latent_layer + 1);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto v = z.sample(i);
            out.emplace_back(v.begin(), v.end());
        }
    }
    return out;
}

template <class T>
std::vector<double> encode_latent(const ModelGraph<T>& model, const Tensor<T>& image) {
    if (image.shape().n != 1) throw ShapeError("encode_latent expects a single image");
    return encode_latents(model, image).front();
}

struct SupervisedDecision {
    Label label = Label::good;
    double probability = 0.0;  // model output, probability of defect
};

/// Defect iff the sigmoid output is at least `cutoff`.
template <class T>
std::vector<SupervisedDecision> classify_supervised(const ModelGraph<T>& model, const Tensor<T>& images,
                                                    double cutoff = 0.5) {
    const std::size_t n = images.shape().n;
    std::vector<SupervisedDecision> out;
    for (std::size_t start = 0; start < n; start += kScoringBatch) {
        std::vector<std::size_t> idx(std::min(kScoringBatch, n - start));
        std::iota(idx.begin(), idx.end(), start);
        const auto y = forward_model(model, gather_samples(images, idx), Mode::eval);
        if (y.shape().per_sample() != 1) throw ShapeError("classifier must produce one output per image");
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const double p = y[i];
            out.push_back({p >= cutoff ? Label::defect : Label::good, p});
        }
    }
    return out;
}

}  // namespace anomaly
