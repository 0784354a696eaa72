#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "anomaly/core/error.hpp"
#include "anomaly/data/image.hpp"

namespace anomaly {

// Defect is the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion_counts(std::span<const Label> labels, std::span<const Label> predictions) {
    if (labels.size() != predictions.size()) {
        throw DataError("confusion_counts: " + std::to_string(labels.size()) + " labels vs " +
                        std::to_string(predictions.size()) + " predictions");
    }
    if (labels.empty()) throw DataError("confusion_counts: no samples");
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool actual = labels[i] == Label::defect;
        const bool predicted = predictions[i] == Label::defect;
        if (actual && predicted) ++c.tp;
        else if (!actual && predicted) ++c.fp;
        else if (!actual) ++c.tn;
        else ++c.fn;
    }
    return c;
}

/// tp / (tp + (fp + fn) / 2), or 0 when nothing was positive in either labels or predictions.
inline double f1_score(const ConfusionCounts& c) {
    const double denom = static_cast<double>(c.tp) + 0.5 * static_cast<double>(c.fp + c.fn);
    return denom == 0.0 ? 0.0 : static_cast<double>(c.tp) / denom;
}

inline double precision(const ConfusionCounts& c) {
    return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

inline double recall(const ConfusionCounts& c) {
    return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

/// Probability that a random defect scores above a random good sample, ties
/// counting one half. Computed from midranks (Mann-Whitney U).
inline double roc_auc(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size()) throw DataError("roc_auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    for (double s : scores) {
        if (std::isnan(s)) throw NumericError("roc_auc: NaN score");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == Label::defect) {
                positive_rank_sum += midrank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc: undefined, only one class present");
    const double p = static_cast<double>(n_pos);
    const double u = positive_rank_sum - p * (p + 1) / 2;
    return u / (p * static_cast<double>(n_neg));
}

}  // namespace anomaly
