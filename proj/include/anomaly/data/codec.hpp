#pragma once

#include <array>
#include <filesystem>
#include <fstream>

#include "anomaly/data/pnm.hpp"

#ifdef ANOMALY_WITH_PNG
#include <png.h>
#endif

namespace anomaly {

inline constexpr bool kPngSupported =
#ifdef ANOMALY_WITH_PNG
    true;
#else
    false;
#endif

#ifdef ANOMALY_WITH_PNG
/// Decode a PNG into gray or RGB; alpha is discarded, 16-bit input is reduced to 8-bit.
inline Image read_png(const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw DataError(path.string() + ": " + png.message);
    }
    const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
    png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const std::size_t channels = color ? 3 : 1;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
        const std::string msg = png.message;
        png_image_free(&png);
        throw DataError(path.string() + ": " + msg);
    }
    Image img(Shape{1, channels, png.height, png.width});
    for (std::size_t y = 0; y < png.height; ++y)
        for (std::size_t x = 0; x < png.width; ++x)
            for (std::size_t c = 0; c < channels; ++c)
                img(0, c, y, x) = static_cast<float>(buf[(y * png.width + x) * channels + c]) / 255.0f;
    return img;
}
#endif

/// Decode any supported file by its signature (not its extension).
inline Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::array<unsigned char, 4> sig{};
    in.read(reinterpret_cast<char*>(sig.data()), sig.size());
    in.close();
    if (sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) return pnm::read(path);
    if (sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G') {
#ifdef ANOMALY_WITH_PNG
        return read_png(path);
#else
        throw DataError(path.string() + ": PNG support not compiled in");
#endif
    }
    throw DataError(path.string() + ": unrecognized image format");
}

}  // namespace anomaly
