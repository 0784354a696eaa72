#include <gtest/gtest.h>

#include <sstream>

#include "anomaly/data/codec.hpp"
#include "reference.hpp"
#include "tempdir.hpp"

using namespace anomaly;

namespace {

std::string pnm_bytes(const char* magic, std::size_t w, std::size_t h, unsigned maxval, const std::string& body) {
    return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) +
           "\n" + body;
}

std::string random_body(std::size_t n, Rng& rng) {
    std::string s(n, '\0');
    for (auto& ch : s) ch = static_cast<char>(rng.uniform_int(0, 255));
    return s;
}

}  // namespace

TEST(Pnm, EightBitRoundTripIsByteExact) {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto w = static_cast<std::size_t>(rng.uniform_int(1, 17));
        const auto h = static_cast<std::size_t>(rng.uniform_int(1, 17));
        const bool color = trial % 2 == 1;
        const std::string bytes = pnm_bytes(color ? "P6" : "P5", w, h, 255, random_body(w * h * (color ? 3 : 1), rng));
        std::istringstream in(bytes);
        const Image img = pnm::decode(in);
        EXPECT_EQ(img.shape(), (Shape{1, color ? 3u : 1u, h, w}));
        std::ostringstream out;
        pnm::encode(out, img);
        EXPECT_EQ(out.str(), bytes);
    }
}

TEST(Pnm, DecodesChannelsInPlanarOrder) {
    // one RGB pixel followed by a second: interleaved on disk, planar in memory
    std::istringstream in(pnm_bytes("P6", 2, 1, 255, std::string("\xff\x00\x33\x00\x66\xff", 6)));
    const Image img = pnm::decode(in);
    EXPECT_FLOAT_EQ(img(0, 0, 0, 0), 1.0f);
    EXPECT_FLOAT_EQ(img(0, 1, 0, 0), 0.0f);
    EXPECT_FLOAT_EQ(img(0, 2, 0, 0), 0.2f);
    EXPECT_FLOAT_EQ(img(0, 1, 0, 1), 0.4f);
    EXPECT_FLOAT_EQ(img(0, 2, 0, 1), 1.0f);
}

TEST(Pnm, HeaderCommentsAndSixteenBitSamples) {
    std::istringstream in("P5\n# a comment\n2 1 # trailing\n65535\n" + std::string("\x80\x00\xff\xff", 4));
    const Image img = pnm::decode(in);
    EXPECT_FLOAT_EQ(img[0], 32768.0f / 65535.0f);
    EXPECT_FLOAT_EQ(img[1], 1.0f);
    std::ostringstream out;
    pnm::encode(out, img, 65535);
    EXPECT_EQ(out.str().substr(out.str().size() - 4), std::string("\x80\x00\xff\xff", 4));
}

TEST(Pnm, RejectsMalformedInput) {
    const std::vector<std::string> bad = {
        "P4\n1 1\n255\n\x01",
        "P5\n2 2\n255\n\x01\x02",      // truncated
        "P5\n1 1\n0\n\x00",            // maxval 0
        "P5\n1 1\n70000\n\x00\x00",    // maxval too large
        "P5\n0 1\n255\n",              // zero width
        "P5\n1 1\n100\n\xc8",          // sample above maxval
        "P5\nx 1\n255\n\x00",
    };
    for (const auto& b : bad) {
        std::istringstream in(b);
        EXPECT_THROW(pnm::decode(in), DataError) << b;
    }
}

TEST(Pnm, EncodeClampsAndRounds) {
    Image img(Shape{1, 1, 1, 4}, std::vector<float>{-0.5f, 0.5f, 1.5f, 1.0f / 255.0f});
    std::ostringstream out;
    pnm::encode(out, img);
    EXPECT_EQ(out.str(), "P5\n4 1\n255\n" + std::string("\x00\x80\xff\x01", 4));
    EXPECT_THROW(pnm::encode(out, Image(Shape{1, 2, 1, 1})), DataError);
}

TEST(Codec, DispatchesOnSignatureAndReportsPath) {
    oracle::TempDir dir;
    oracle::write_bytes(dir / "a.png", pnm_bytes("P5", 1, 1, 255, "\x40"));  // misleading extension
    EXPECT_FLOAT_EQ(read_image(dir / "a.png")[0], 64.0f / 255.0f);
    oracle::write_bytes(dir / "b.pgm", "GIF89a");
    try {
        read_image(dir / "b.pgm");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("b.pgm"), std::string::npos);
    }
    EXPECT_THROW(read_image(dir / "missing.pgm"), DataError);
}

#ifdef ANOMALY_WITH_PNG
TEST(Codec, PngMatchesPnmOfSamePixels) {
    oracle::TempDir dir;
    Rng rng(2);
    const std::size_t w = 7, h = 5;
    std::vector<unsigned char> rgb(w * h * 3);
    for (auto& v : rgb) v = static_cast<unsigned char>(rng.uniform_int(0, 255));
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = w;
    png.height = h;
    png.format = PNG_FORMAT_RGB;
    ASSERT_TRUE(png_image_write_to_file(&png, (dir / "x.png").c_str(), 0, rgb.data(), 0, nullptr));
    oracle::write_bytes(dir / "x.ppm", pnm_bytes("P6", w, h, 255, std::string(rgb.begin(), rgb.end())));
    EXPECT_EQ(read_image(dir / "x.png"), read_image(dir / "x.ppm"));
}
#endif
