#pragma once

#include <algorithm>
#include <cmath>

#include "anomaly/data/image.hpp"

namespace anomaly {

inline Image center_crop_square(const Image& img) {
    const Shape& s = img.shape();
    const std::size_t side = std::min(s.h, s.w);
    if (s.h == s.w) return img;
    const std::size_t y0 = (s.h - side) / 2, x0 = (s.w - side) / 2;
    Image out(Shape{1, s.c, side, side});
    for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x) out(0, c, y, x) = img(0, c, y0 + y, x0 + x);
    return out;
}

/// ITU-R BT.601 luminance; single-channel input is returned as is.
inline Image to_grayscale(const Image& img) {
    const Shape& s = img.shape();
    if (s.c == 1) return img;
    if (s.c != 3) throw DataError("grayscale conversion expects 1 or 3 channels, got " + std::to_string(s.c));
    Image out(Shape{1, 1, s.h, s.w});
    for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
            const double v = 0.299 * img(0, 0, y, x) + 0.587 * img(0, 1, y, x) + 0.114 * img(0, 2, y, x);
            out(0, 0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    return out;
}

/// Downscale a square image to size x size: block mean when the source side is
/// an integer multiple of the target, bilinear (pixel-center aligned) otherwise.
inline Image resize_square(const Image& img, std::size_t size) {
    const Shape& s = img.shape();
    if (s.h != s.w) throw DataError("resize expects a square image, got " + s.str());
    if (size == 0) throw DataError("resize target must be positive");
    if (size > s.h) {
        throw DataError("refusing to upscale " + std::to_string(s.h) + "x" + std::to_string(s.w) + " to " +
                        std::to_string(size) + "x" + std::to_string(size));
    }
    if (size == s.h) return img;
    Image out(Shape{1, s.c, size, size});
    if (s.h % size == 0) {
        const std::size_t f = s.h / size;
        const double inv = 1.0 / static_cast<double>(f * f);
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t y = 0; y < size; ++y)
                for (std::size_t x = 0; x < size; ++x) {
                    double acc = 0.0;
                    for (std::size_t dy = 0; dy < f; ++dy)
                        for (std::size_t dx = 0; dx < f; ++dx) acc += img(0, c, y * f + dy, x * f + dx);
                    out(0, c, y, x) = static_cast<float>(acc * inv);
                }
        return out;
    }
    const double scale = static_cast<double>(s.h) / static_cast<double>(size);
    const auto last = static_cast<double>(s.h - 1);
    for (std::size_t y = 0; y < size; ++y) {
        const double sy = std::clamp((static_cast<double>(y) + 0.5) * scale - 0.5, 0.0, last);
        const auto y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, s.h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < size; ++x) {
            const double sx = std::clamp((static_cast<double>(x) + 0.5) * scale - 0.5, 0.0, last);
            const auto x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, s.w - 1);
            const double fx = sx - static_cast<double>(x0);
            for (std::size_t c = 0; c < s.c; ++c) {
                const double top = (1 - fx) * img(0, c, y0, x0) + fx * img(0, c, y0, x1);
                const double bottom = (1 - fx) * img(0, c, y1, x0) + fx * img(0, c, y1, x1);
                out(0, c, y, x) = static_cast<float>(std::clamp((1 - fy) * top + fy * bottom, 0.0, 1.0));
            }
        }
    }
    return out;
}

inline Image preprocess_image(const Image& img, std::size_t target_size, bool grayscale) {
    Image out = center_crop_square(img);
    if (grayscale) out = to_grayscale(out);
    return resize_square(out, target_size);
}

/// Center-crop, optionally convert to grayscale and downscale every sample.
/// Applying it twice with the same arguments is the same as applying it once.
inline Dataset preprocess(const Dataset& ds, std::size_t target_size, bool grayscale) {
    Dataset out{ds.class_name, {}, ds.seed};
    out.samples.reserve(ds.samples.size());
    for (const auto& s : ds.samples) {
        ImageSample p = s;
        try {
            p.pixels = preprocess_image(s.pixels, target_size, grayscale);
        } catch (const DataError& e) {
            throw DataError(s.source_path + ": " + e.what());
        }
        out.samples.push_back(std::move(p));
    }
    return out;
}

}  // namespace anomaly
