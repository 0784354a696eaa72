#pragma once

// Desk-scale stand-in for an industrial inspection set: one centered bright
// object per image on a dark background, with scratches or holes as defects.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "anomaly/core/rng.hpp"
#include "anomaly/data/image.hpp"

namespace anomaly {

enum class ShapeKind { disk, rect };
enum class DefectKind { scratch, hole };

inline std::string_view to_string(ShapeKind k) { return k == ShapeKind::disk ? "disk" : "rect"; }
inline std::string_view to_string(DefectKind k) { return k == DefectKind::scratch ? "scratch" : "hole"; }

inline ShapeKind parse_shape_kind(std::string_view s) {
    if (s == "disk") return ShapeKind::disk;
    if (s == "rect") return ShapeKind::rect;
    throw ConfigError("unknown synthetic shape '" + std::string(s) + "' (expected disk or rect)");
}

struct SyntheticSpec {
    ShapeKind shape = ShapeKind::disk;
    std::size_t n_train = 100;
    std::size_t n_test = 40;
    double defect_rate = 0.5;
    std::size_t image_size = 64;
    std::uint64_t seed = 0;
    std::size_t channels = 1;
};

inline constexpr std::size_t kMinSyntheticSize = 16;

struct BoundingBox {
    std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)

    bool contains(std::size_t x, std::size_t y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct ObjectParams {
    ShapeKind shape = ShapeKind::disk;
    double half_extent = 0;  // radius for a disk, half side for a square
    double object_level = 0.7;
    double background_level = 0.1;
};

struct DefectParams {
    DefectKind kind = DefectKind::scratch;
    double ax = 0, ay = 0, bx = 0, by = 0;  // scratch segment; a is the hole center
    double width = 3;                       // scratch width or hole diameter, pixels
    double level = 0.1;

    BoundingBox bbox(std::size_t size) const {
        const double r = width / 2 + 1;
        const auto lo = [](double v) { return static_cast<std::size_t>(std::max(0.0, std::floor(v))); };
        const auto hi = [size](double v) {
            return static_cast<std::size_t>(std::clamp(std::ceil(v) + 1, 0.0, static_cast<double>(size)));
        };
        if (kind == DefectKind::hole) return {lo(ax - r), lo(ay - r), hi(ax + r), hi(ay + r)};
        return {lo(std::min(ax, bx) - r), lo(std::min(ay, by) - r), hi(std::max(ax, bx) + r),
                hi(std::max(ay, by) + r)};
    }
};

struct SyntheticItem {
    ObjectParams object;
    std::optional<DefectParams> defect;
    Split split = Split::train;
};

namespace detail {

inline double segment_distance(double px, double py, const DefectParams& d) {
    const double vx = d.bx - d.ax, vy = d.by - d.ay;
    const double len2 = vx * vx + vy * vy;
    const double t = len2 > 0 ? std::clamp(((px - d.ax) * vx + (py - d.ay) * vy) / len2, 0.0, 1.0) : 0.0;
    return std::hypot(px - (d.ax + t * vx), py - (d.ay + t * vy));
}

inline bool inside_object(double dx, double dy, const ObjectParams& o) {
    if (o.shape == ShapeKind::disk) return dx * dx + dy * dy <= o.half_extent * o.half_extent;
    return std::fabs(dx) <= o.half_extent && std::fabs(dy) <= o.half_extent;
}

inline DefectParams draw_defect(Rng& rng, const ObjectParams& o, double center) {
    DefectParams d;
    d.kind = rng.uniform() < 0.5 ? DefectKind::scratch : DefectKind::hole;
    d.level = o.background_level;
    const double angle = rng.uniform(0.0, 2 * std::numbers::pi);
    const double dist = rng.uniform(0.0, 0.35 * o.half_extent);
    d.ax = center + dist * std::cos(angle);
    d.ay = center + dist * std::sin(angle);
    if (d.kind == DefectKind::hole) {
        d.width = rng.uniform(std::max(6.0, 0.3 * o.half_extent), std::max(8.0, 0.5 * o.half_extent));
        d.bx = d.ax;
        d.by = d.ay;
    } else {
        d.width = rng.uniform(3.0, 4.0);
        const double len = rng.uniform(0.6, 1.0) * o.half_extent;
        const double dir = rng.uniform(0.0, std::numbers::pi);
        d.bx = d.ax + len * std::cos(dir);
        d.by = d.ay + len * std::sin(dir);
    }
    return d;
}

}  // namespace detail

/// Draw the render parameters for every sample: train items first, then test.
inline std::vector<SyntheticItem> plan_synthetic(const SyntheticSpec& spec) {
    if (spec.n_train < 1 || spec.n_test < 1) throw ConfigError("synthetic set needs n_train >= 1 and n_test >= 1");
    if (!(spec.defect_rate >= 0.0 && spec.defect_rate <= 1.0)) throw ConfigError("defect_rate must be in [0,1]");
    if (spec.channels != 1 && spec.channels != 3) throw ConfigError("synthetic channels must be 1 or 3");
    if (spec.image_size < kMinSyntheticSize) {
        throw ConfigError("defect too large for image: synthetic images need at least " +
                          std::to_string(kMinSyntheticSize) + " pixels per side");
    }
    const double size = static_cast<double>(spec.image_size);
    const double center = (size - 1) / 2;

    // which test items carry a defect
    const auto n_defect = static_cast<std::size_t>(std::lround(spec.defect_rate * static_cast<double>(spec.n_test)));
    std::vector<std::size_t> order(spec.n_test);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(spec.seed, "synthetic-labels");
    std::shuffle(order.begin(), order.end(), shuffle);
    std::vector<bool> is_defect(spec.n_test, false);
    for (std::size_t i = 0; i < n_defect; ++i) is_defect[order[i]] = true;

    std::vector<SyntheticItem> items;
    items.reserve(spec.n_train + spec.n_test);
    for (std::size_t i = 0; i < spec.n_train + spec.n_test; ++i) {
        Rng rng(spec.seed, "synthetic-item", i);
        SyntheticItem item;
        item.split = i < spec.n_train ? Split::train : Split::test;
        item.object.shape = spec.shape;
        const double nominal = spec.shape == ShapeKind::disk ? 0.30 * size : 0.26 * size;
        item.object.half_extent = nominal * rng.uniform(0.96, 1.04);
        item.object.object_level = rng.uniform(0.65, 0.75);
        item.object.background_level = rng.uniform(0.07, 0.13);
        if (item.split == Split::test && is_defect[i - spec.n_train]) {
            item.defect = detail::draw_defect(rng, item.object, center);
        }
        items.push_back(item);
    }
    return items;
}

/// Rasterize one item; pixels inside the object and the defect footprint take
/// the defect level.
inline Image render_synthetic(const ObjectParams& o, const std::optional<DefectParams>& defect, std::size_t size,
                              std::size_t channels = 1) {
    static constexpr double kTint[3] = {1.0, 0.85, 0.7};
    Image img(Shape{1, channels, size, size});
    const double center = (static_cast<double>(size) - 1) / 2;
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double px = static_cast<double>(x), py = static_cast<double>(y);
            double v = o.background_level;
            if (detail::inside_object(px - center, py - center, o)) {
                v = o.object_level;
                if (defect) {
                    const double dist = defect->kind == DefectKind::hole ? std::hypot(px - defect->ax, py - defect->ay)
                                                                         : detail::segment_distance(px, py, *defect);
                    if (dist <= defect->width / 2) v = defect->level;
                }
            }
            for (std::size_t c = 0; c < channels; ++c) {
                img(0, c, y, x) = static_cast<float>(channels == 1 ? v : v * kTint[c]);
            }
        }
    }
    return img;
}

inline Dataset generate_synthetic_set(const SyntheticSpec& spec) {
    const auto items = plan_synthetic(spec);
    Dataset ds;
    ds.class_name = "synthetic-" + std::string(to_string(spec.shape));
    ds.seed = spec.seed;
    ds.samples.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        ImageSample s;
        s.pixels = render_synthetic(item.object, item.defect, spec.image_size, spec.channels);
        s.split = item.split;
        s.label = item.defect ? Label::defect : Label::good;
        s.defect_kind = item.defect ? std::string(to_string(item.defect->kind)) : "good";
        s.source_path = "synthetic/" + std::string(to_string(s.split)) + "/" + s.defect_kind + "/" +
                        std::to_string(i);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

/// Labeled training images for a supervised classifier: `spec.n_train` images
/// drawn like test images (defects at `spec.defect_rate`) from an independent
/// stream, all marked as the train split.
inline std::vector<ImageSample> generate_labeled_training_set(const SyntheticSpec& spec) {
    SyntheticSpec labeled = spec;
    labeled.n_test = spec.n_train;
    labeled.n_train = 1;
    labeled.seed = derive_seed(spec.seed, "labeled-train");
    auto ds = generate_synthetic_set(labeled);
    std::vector<ImageSample> out;
    out.reserve(spec.n_train);
    for (auto& s : ds.samples) {
        if (s.split != Split::test) continue;
        s.split = Split::train;
        s.source_path = "synthetic/train-labeled/" + s.defect_kind + "/" + std::to_string(out.size());
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace anomaly
