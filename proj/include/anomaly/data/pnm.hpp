#pragma once

// Binary PGM (P5) and PPM (P6) codec. Samples are stored as value/maxval in
// float, so an 8-bit file decodes and re-encodes to the same bytes.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "anomaly/data/image.hpp"

namespace anomaly::pnm {

namespace detail {

inline void skip_space_and_comments(std::istream& in) {
    for (;;) {
        const int ch = in.peek();
        if (ch == '#') {
            std::string ignored;
            std::getline(in, ignored);
        } else if (ch != EOF && std::isspace(ch)) {
            in.get();
        } else {
            return;
        }
    }
}

inline std::size_t read_header_int(std::istream& in, const char* field) {
    skip_space_and_comments(in);
    std::size_t v = 0;
    bool any = false;
    while (std::isdigit(in.peek())) {
        v = v * 10 + static_cast<std::size_t>(in.get() - '0');
        any = true;
        if (v > (1u << 24)) throw DataError(std::string("PNM header: ") + field + " too large");
    }
    if (!any) throw DataError(std::string("PNM header: missing ") + field);
    return v;
}

}  // namespace detail

inline Image decode(std::istream& in) {
    char magic[2] = {};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
        throw DataError("not a binary PGM/PPM file");
    }
    const std::size_t channels = magic[1] == '5' ? 1 : 3;
    const std::size_t width = detail::read_header_int(in, "width");
    const std::size_t height = detail::read_header_int(in, "height");
    const std::size_t maxval = detail::read_header_int(in, "maxval");
    if (width == 0 || height == 0) throw DataError("PNM header: zero image extent");
    if (maxval == 0 || maxval > 65535) throw DataError("PNM header: maxval out of range");
    if (!std::isspace(in.get())) throw DataError("PNM header: expected whitespace after maxval");

    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    const std::size_t count = width * height * channels;
    std::string raw(count * bytes_per, '\0');
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw DataError("PNM: truncated pixel data");

    Image img(Shape{1, channels, height, width});
    const float scale = static_cast<float>(maxval);
    const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t i = (y * width + x) * channels + c;
                const unsigned v = bytes_per == 1 ? bytes[i] : (unsigned(bytes[2 * i]) << 8) | bytes[2 * i + 1];
                if (v > maxval) throw DataError("PNM: sample exceeds maxval");
                img(0, c, y, x) = static_cast<float>(v) / scale;
            }
        }
    }
    return img;
}

/// Writes P5 for one channel, P6 for three. Values are clamped to [0,1].
inline void encode(std::ostream& out, const Image& img, unsigned maxval = 255) {
    const Shape& s = img.shape();
    if (s.n != 1 || (s.c != 1 && s.c != 3)) throw DataError("PNM encode: expected (1,1|3,H,W), got " + s.str());
    if (maxval == 0 || maxval > 65535) throw DataError("PNM encode: maxval out of range");
    out << (s.c == 1 ? "P5" : "P6") << '\n' << s.w << ' ' << s.h << '\n' << maxval << '\n';
    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    std::string raw(s.size() * bytes_per, '\0');
    for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) {
            for (std::size_t c = 0; c < s.c; ++c) {
                const float v = std::clamp(img(0, c, y, x), 0.0f, 1.0f);
                const auto q = static_cast<unsigned>(std::lround(v * static_cast<float>(maxval)));
                const std::size_t i = (y * s.w + x) * s.c + c;
                if (bytes_per == 1) {
                    raw[i] = static_cast<char>(q);
                } else {
                    raw[2 * i] = static_cast<char>(q >> 8);
                    raw[2 * i + 1] = static_cast<char>(q & 0xFF);
                }
            }
        }
    }
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("PNM encode: write failed");
}

inline Image read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return decode(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline void write(const std::filesystem::path& path, const Image& img, unsigned maxval = 255) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    encode(out, img, maxval);
}

}  // namespace anomaly::pnm
