#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anomaly/core/error.hpp"

namespace anomaly {

inline constexpr double kKdeMinBandwidth = 1e-3;
inline constexpr double kKdeLogFloor = -1e12;

/// Isotropic Gaussian KDE over stored latent vectors.
struct KdeModel {
    std::size_t n = 0, d = 0;
    std::vector<double> latents;  // row-major n x d
    double bandwidth = 1.0;
    bool bandwidth_floored = false;  // auto bandwidth hit the floor (degenerate spread)

    std::span<const double> row(std::size_t i) const { return {latents.data() + i * d, d}; }
    bool operator==(const KdeModel&) const = default;
};

/// Scott's rule with the mean per-dimension standard deviation (n-1 denominator):
/// h = sigma_bar * n^(-1/(d+4)), floored at 1e-3.
inline double scott_bandwidth(std::span<const double> latents, std::size_t n, std::size_t d, bool* floored = nullptr) {
    double sigma_sum = 0.0;
    if (n >= 2) {
        for (std::size_t j = 0; j < d; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += latents[i * d + j];
            mean /= static_cast<double>(n);
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) ss += (latents[i * d + j] - mean) * (latents[i * d + j] - mean);
            sigma_sum += std::sqrt(ss / static_cast<double>(n - 1));
        }
    }
    const double sigma = sigma_sum / static_cast<double>(d);
    const double h = sigma * std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
    const bool hit_floor = !(h >= kKdeMinBandwidth);
    if (floored) *floored = hit_floor;
    return hit_floor ? kKdeMinBandwidth : h;
}

/// Fit from n row vectors of equal length; a missing bandwidth selects Scott's rule.
inline KdeModel fit_kde(const std::vector<std::vector<double>>& rows, std::optional<double> bandwidth = std::nullopt) {
    if (rows.empty()) throw DataError("fit_kde: no latent vectors");
    KdeModel m;
    m.n = rows.size();
    m.d = rows.front().size();
    if (m.d == 0) throw DataError("fit_kde: zero-dimensional latents");
    m.latents.reserve(m.n * m.d);
    for (const auto& r : rows) {
        if (r.size() != m.d) throw ShapeError("fit_kde: latent vectors differ in length");
        for (double v : r) {
            if (!std::isfinite(v)) throw NumericError("fit_kde: non-finite latent value");
        }
        m.latents.insert(m.latents.end(), r.begin(), r.end());
    }
    if (bandwidth) {
        if (!(*bandwidth > 0.0)) throw ConfigError("fit_kde: bandwidth must be positive");
        m.bandwidth = *bandwidth;
    } else {
        m.bandwidth = scott_bandwidth(m.latents, m.n, m.d, &m.bandwidth_floored);
    }
    return m;
}

/// log[(1/n) sum_i N(z; z_i, h^2 I)] via log-sum-exp, clamped below at -1e12.
inline double kde_log_density(const KdeModel& kde, std::span<const double> z) {
    if (z.size() != kde.d) {
        throw ShapeError("kde: query has dimension " + std::to_string(z.size()) + ", model has " +
                         std::to_string(kde.d));
    }
    const double inv2h2 = 1.0 / (2.0 * kde.bandwidth * kde.bandwidth);
    std::vector<double> expo(kde.n);
    for (std::size_t i = 0; i < kde.n; ++i) {
        const auto r = kde.row(i);
        double dist2 = 0.0;
        for (std::size_t j = 0; j < kde.d; ++j) dist2 += (z[j] - r[j]) * (z[j] - r[j]);
        expo[i] = -dist2 * inv2h2;
    }
    const double peak = *std::max_element(expo.begin(), expo.end());
    double sum = 0.0;
    for (double e : expo) sum += std::exp(e - peak);
    const double d = static_cast<double>(kde.d);
    const double log_norm = 0.5 * d * std::log(2.0 * std::numbers::pi * kde.bandwidth * kde.bandwidth);
    const double v = peak + std::log(sum) - std::log(static_cast<double>(kde.n)) - log_norm;
    return std::isnan(v) ? kKdeLogFloor : std::max(v, kKdeLogFloor);
}

/// Average contiguous blocks so that the result has `target` entries.
inline std::vector<double> pool_latent(std::span<const double> z, std::size_t target) {
    if (target == 0 || z.size() % target != 0) {
        throw ConfigError("latent pool size " + std::to_string(target) + " does not divide latent length " +
                          std::to_string(z.size()));
    }
    const std::size_t block = z.size() / target;
    std::vector<double> out(target, 0.0);
    for (std::size_t i = 0; i < target; ++i) {
        for (std::size_t k = 0; k < block; ++k) out[i] += z[i * block + k];
        out[i] /= static_cast<double>(block);
    }
    return out;
}

}  // namespace anomaly
