#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "anomaly/data/pnm.hpp"
#include "anomaly/metrics/csv.hpp"

namespace anomaly {

struct ScoreGroup {
    std::string name;  // e.g. "test/defect"
    std::vector<double> scores;
};

struct Histogram {
    std::vector<double> edges;  // bins + 1 shared edges
    std::vector<std::string> groups;
    std::vector<std::vector<std::size_t>> counts;  // [group][bin]

    std::size_t bins() const { return edges.size() - 1; }

    /// Number of scores in `group` falling in bins whose lower edge is >= threshold.
    std::size_t mass_above(std::size_t group, double threshold) const {
        std::size_t n = 0;
        for (std::size_t b = 0; b < bins(); ++b) n += edges[b] >= threshold ? counts[group][b] : 0;
        return n;
    }
};

/// Count every group over one set of equal-width edges spanning all scores.
/// The last bin is closed on the right. A zero-width range is widened to +-0.5.
inline Histogram score_histogram(const std::vector<ScoreGroup>& groups, std::size_t bins) {
    if (bins < 2) throw ConfigError("histogram needs at least 2 bins");
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    std::size_t total = 0;
    for (const auto& g : groups) {
        for (double s : g.scores) {
            if (!std::isfinite(s)) throw NumericError("histogram: non-finite score in group " + g.name);
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        total += g.scores.size();
    }
    if (total == 0) throw DataError("histogram: no scores");
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
        h.edges[b] = b == bins ? hi : lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
    }
    for (const auto& g : groups) {
        h.groups.push_back(g.name);
        std::vector<std::size_t> c(bins, 0);
        for (double s : g.scores) {
            const double t = (s - lo) / (hi - lo) * static_cast<double>(bins);
            const auto b = std::min(static_cast<std::size_t>(std::max(t, 0.0)), bins - 1);
            ++c[b];
        }
        h.counts.push_back(std::move(c));
    }
    return h;
}

inline void write_histogram_csv(const Histogram& h, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "bin_lo,bin_hi";
    for (const auto& g : h.groups) out << ',' << csv::quote(g);
    out << '\n';
    for (std::size_t b = 0; b < h.bins(); ++b) {
        out << csv::fixed(h.edges[b]) << ',' << csv::fixed(h.edges[b + 1]);
        for (const auto& c : h.counts) out << ',' << c[b];
        out << '\n';
    }
}

/// Bar chart as a grayscale image: one column block per bin, groups side by
/// side in decreasing brightness, optional vertical marker at `threshold`.
inline Image render_histogram(const Histogram& h, std::optional<double> threshold = std::nullopt,
                              std::size_t height = 120, std::size_t bar_width = 4) {
    const std::size_t groups = std::max<std::size_t>(h.groups.size(), 1);
    const std::size_t slot = groups * bar_width + 2;
    const std::size_t width = h.bins() * slot + 2;
    Image img(Shape{1, 1, height, width}, 0.0f);
    std::size_t peak = 1;
    for (const auto& c : h.counts) peak = std::max(peak, *std::max_element(c.begin(), c.end()));
    for (std::size_t g = 0; g < h.counts.size(); ++g) {
        const float level = 1.0f - 0.5f * static_cast<float>(g) / static_cast<float>(groups);
        for (std::size_t b = 0; b < h.bins(); ++b) {
            const std::size_t bar = h.counts[g][b] * (height - 1) / peak;
            const std::size_t x0 = 1 + b * slot + g * bar_width;
            for (std::size_t y = height - bar; y < height; ++y)
                for (std::size_t x = x0; x < x0 + bar_width; ++x) img(0, 0, y, x) = level;
        }
    }
    if (threshold) {
        const double lo = h.edges.front(), hi = h.edges.back();
        const double t = std::clamp((*threshold - lo) / (hi - lo), 0.0, 1.0);
        const auto x = static_cast<std::size_t>(1 + t * static_cast<double>(h.bins() * slot - 1));
        for (std::size_t y = 0; y < height; y += 2) img(0, 0, y, std::min(x, width - 1)) = 0.35f;
    }
    return img;
}

}  // namespace anomaly
