#pragma once

#include <algorithm>
#include <tuple>
#include <utility>

#include "anomaly/data/image.hpp"

namespace anomaly {

struct SsimOptions {
    std::size_t window = 8;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

struct SsimResult {
    double score = 0.0;  // mean over all windows
    Image map;           // (1,1,H-w+1,W-w+1), one value per window position
};

/// Structural similarity over every w x w window (stride 1, uniform weights,
/// population variances). Multi-channel inputs average the per-channel maps.
inline SsimResult ssim(const Image& a, const Image& b, const SsimOptions& opt = {}) {
    const Shape& s = a.shape();
    if (!(s == b.shape())) throw ShapeError("ssim: shapes differ " + s.str() + " vs " + b.shape().str());
    if (s.n != 1) throw ShapeError("ssim expects single images");
    const std::size_t w = opt.window;
    if (w == 0 || s.h < w || s.w < w) {
        throw DataError("ssim: image " + std::to_string(s.h) + "x" + std::to_string(s.w) + " smaller than the " +
                        std::to_string(w) + "x" + std::to_string(w) + " window");
    }
    const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
    const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
    const std::size_t mh = s.h - w + 1, mw = s.w - w + 1;
    const double inv = 1.0 / static_cast<double>(w * w);
    std::vector<double> acc(mh * mw, 0.0);
    for (std::size_t c = 0; c < s.c; ++c) {
        for (std::size_t y = 0; y < mh; ++y) {
            for (std::size_t x = 0; x < mw; ++x) {
                double ma = 0.0, mb = 0.0;
                for (std::size_t dy = 0; dy < w; ++dy)
                    for (std::size_t dx = 0; dx < w; ++dx) {
                        ma += a(0, c, y + dy, x + dx);
                        mb += b(0, c, y + dy, x + dx);
                    }
                ma *= inv;
                mb *= inv;
                double va = 0.0, vb = 0.0, cov = 0.0;
                for (std::size_t dy = 0; dy < w; ++dy)
                    for (std::size_t dx = 0; dx < w; ++dx) {
                        const double da = a(0, c, y + dy, x + dx) - ma;
                        const double db = b(0, c, y + dy, x + dx) - mb;
                        va += da * da;
                        vb += db * db;
                        cov += da * db;
                    }
                va *= inv;
                vb *= inv;
                cov *= inv;
                // canonical operand order keeps ssim(a,b) == ssim(b,a) even with fused multiply-add
                if (std::tie(ma, va) > std::tie(mb, vb)) {
                    std::swap(ma, mb);
                    std::swap(va, vb);
                }
                acc[y * mw + x] += ((2 * (ma * mb) + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
    }
    SsimResult r;
    r.map = Image(Shape{1, 1, mh, mw});
    double total = 0.0;
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const double v = acc[i] / static_cast<double>(s.c);
        r.map[i] = static_cast<float>(v);
        total += v;
    }
    r.score = total / static_cast<double>(acc.size());
    return r;
}

/// (1 - ssim_map) / 2, so identical regions are 0 and the image spans [0,1].
inline Image ssim_difference_image(const SsimResult& r) {
    Image out(r.map.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp((1.0f - r.map[i]) * 0.5f, 0.0f, 1.0f);
    return out;
}

}  // namespace anomaly
