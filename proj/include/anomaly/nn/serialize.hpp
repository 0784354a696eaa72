#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "anomaly/core/error.hpp"
#include "anomaly/nn/model.hpp"

// Model file layout (all integers little-endian):
//   "ANOMF1"  u32 version
//   str tag   u64 seed   u32 C,H,W   u32 latent (0xFFFFFFFF = none)
//   u32 layer count, then per layer: u8 kind + kind-specific fields
//   per layer: u32 #params, u32 #buffers, each tensor = 4 x u32 extents + f32 blob
// str = u32 length + bytes. Floats are written as their IEEE-754 bit patterns.

namespace anomaly {

inline constexpr char kModelMagic[6] = {'A', 'N', 'O', 'M', 'F', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace io {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& is, char* dst, std::size_t n) {
    is.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw DataError("unexpected end of file");
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    read_exact(is, reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is) {
    const std::uint64_t lo = get_u32(is);
    const std::uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline std::string get_str(std::istream& is, std::size_t limit = 1 << 20) {
    const std::uint32_t n = get_u32(is);
    if (n > limit) throw DataError("string field too long");
    std::string s(n, '\0');
    read_exact(is, s.data(), n);
    return s;
}

}  // namespace io

namespace detail {

inline void write_tensor(std::ostream& os, const Tensor<float>& t) {
    const Shape& s = t.shape();
    for (std::size_t e : {s.n, s.c, s.h, s.w}) io::put_u32(os, static_cast<std::uint32_t>(e));
    for (float v : t.values()) io::put_f32(os, v);
}

inline Tensor<float> read_tensor(std::istream& is) {
    Shape s;
    s.n = io::get_u32(is);
    s.c = io::get_u32(is);
    s.h = io::get_u32(is);
    s.w = io::get_u32(is);
    if (s.size() > (std::size_t{1} << 31)) throw DataError("tensor too large");
    std::vector<float> data(s.size());
    for (auto& v : data) v = io::get_f32(is);
    return Tensor<float>(s, std::move(data));
}

inline void write_layer(std::ostream& os, const LayerSpec& spec) {
    os.put(static_cast<char>(kind_of(spec)));
    auto u = [&](std::size_t v) { io::put_u32(os, static_cast<std::uint32_t>(v)); };
    switch (kind_of(spec)) {
        case LayerKind::conv2d: {
            const auto& l = std::get<Conv2d>(spec);
            u(l.out_channels), u(l.kernel_h), u(l.kernel_w), u(l.stride), u(l.padding);
            break;
        }
        case LayerKind::conv2d_transpose: {
            const auto& l = std::get<Conv2dTranspose>(spec);
            u(l.out_channels), u(l.kernel_h), u(l.kernel_w), u(l.stride), u(l.padding);
            break;
        }
        case LayerKind::maxpool2d: os.put(static_cast<char>(std::get<MaxPool2d>(spec).odd)); break;
        case LayerKind::dense: u(std::get<Dense>(spec).units); break;
        case LayerKind::activation: os.put(static_cast<char>(std::get<Activation>(spec).fn)); break;
        case LayerKind::batchnorm: {
            const auto& l = std::get<BatchNorm>(spec);
            io::put_f64(os, l.momentum);
            io::put_f64(os, l.eps);
            break;
        }
        case LayerKind::flatten: break;
        case LayerKind::reshape: {
            const auto& l = std::get<Reshape>(spec);
            u(l.c), u(l.h), u(l.w);
            break;
        }
    }
}

inline LayerSpec read_layer(std::istream& is) {
    const int kind = is.get();
    if (kind == EOF) throw DataError("unexpected end of file in layer list");
    auto u = [&] { return static_cast<std::size_t>(io::get_u32(is)); };
    auto byte = [&] {
        const int b = is.get();
        if (b == EOF) throw DataError("unexpected end of file in layer list");
        return static_cast<std::uint8_t>(b);
    };
    switch (static_cast<LayerKind>(kind)) {
        case LayerKind::conv2d: {
            Conv2d l;
            l.out_channels = u(), l.kernel_h = u(), l.kernel_w = u(), l.stride = u(), l.padding = u();
            return l;
        }
        case LayerKind::conv2d_transpose: {
            Conv2dTranspose l;
            l.out_channels = u(), l.kernel_h = u(), l.kernel_w = u(), l.stride = u(), l.padding = u();
            return l;
        }
        case LayerKind::maxpool2d: {
            const auto odd = byte();
            if (odd > 2) throw DataError("invalid maxpool odd-extent policy");
            return MaxPool2d{static_cast<OddPolicy>(odd)};
        }
        case LayerKind::dense: return Dense{u()};
        case LayerKind::activation: {
            const auto fn = byte();
            if (fn > 3) throw DataError("invalid activation id");
            return Activation{static_cast<Act>(fn)};
        }
        case LayerKind::batchnorm: {
            BatchNorm l;
            l.momentum = io::get_f64(is);
            l.eps = io::get_f64(is);
            return l;
        }
        case LayerKind::flatten: return Flatten{};
        case LayerKind::reshape: {
            Reshape l;
            l.c = u(), l.h = u(), l.w = u();
            return l;
        }
    }
    throw DataError("unknown layer kind " + std::to_string(kind));
}

}  // namespace detail

inline void save_model(std::ostream& os, const ModelGraph<float>& model) {
    os.write(kModelMagic, sizeof kModelMagic);
    io::put_u32(os, kModelVersion);
    io::put_str(os, model.tag);
    io::put_u64(os, model.seed);
    io::put_u32(os, static_cast<std::uint32_t>(model.input.c));
    io::put_u32(os, static_cast<std::uint32_t>(model.input.h));
    io::put_u32(os, static_cast<std::uint32_t>(model.input.w));
    io::put_u32(os, model.latent_layer ? static_cast<std::uint32_t>(*model.latent_layer) : 0xFFFFFFFFu);
    io::put_u32(os, static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& l : model.layers) detail::write_layer(os, l);
    for (const auto& st : model.state) {
        io::put_u32(os, static_cast<std::uint32_t>(st.params.size()));
        io::put_u32(os, static_cast<std::uint32_t>(st.buffers.size()));
        for (const auto& t : st.params) detail::write_tensor(os, t);
        for (const auto& t : st.buffers) detail::write_tensor(os, t);
    }
}

inline ModelGraph<float> load_model(std::istream& is) {
    char magic[6];
    io::read_exact(is, magic, sizeof magic);
    if (std::memcmp(magic, kModelMagic, sizeof magic) != 0) throw DataError("not a model file (bad magic)");
    const std::uint32_t version = io::get_u32(is);
    if (version != kModelVersion) throw DataError("unsupported model file version " + std::to_string(version));
    ModelGraph<float> model;
    model.tag = io::get_str(is);
    model.seed = io::get_u64(is);
    model.input = Shape{1, io::get_u32(is), io::get_u32(is), io::get_u32(is)};
    const std::uint32_t latent = io::get_u32(is);
    if (latent != 0xFFFFFFFFu) model.latent_layer = latent;
    const std::uint32_t count = io::get_u32(is);
    if (count > 100000) throw DataError("implausible layer count");
    for (std::uint32_t i = 0; i < count; ++i) model.layers.push_back(detail::read_layer(is));
    model.state.resize(count);
    for (auto& st : model.state) {
        const std::uint32_t np = io::get_u32(is);
        const std::uint32_t nb = io::get_u32(is);
        if (np > 16 || nb > 16) throw DataError("implausible tensor count");
        for (std::uint32_t k = 0; k < np; ++k) st.params.push_back(detail::read_tensor(is));
        for (std::uint32_t k = 0; k < nb; ++k) st.buffers.push_back(detail::read_tensor(is));
    }
    // Validate structure: shapes must chain and parameter shapes must match the specs.
    const auto shapes = layer_shapes(model);
    for (std::size_t l = 0; l < count; ++l) {
        const auto expect = parameter_shapes(model.layers[l], shapes[l]);
        if (expect.size() != model.state[l].params.size()) throw DataError("parameter count mismatch at layer " + std::to_string(l));
        for (std::size_t k = 0; k < expect.size(); ++k) {
            if (!(expect[k] == model.state[l].params[k].shape())) {
                throw DataError("parameter shape mismatch at layer " + std::to_string(l));
            }
        }
    }
    if (model.latent_layer && *model.latent_layer >= count) throw DataError("latent layer index out of range");
    return model;
}

inline void save_model(const std::filesystem::path& path, const ModelGraph<float>& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write model file " + path.string());
    save_model(os, model);
    if (!os) throw DataError("error writing model file " + path.string());
}

inline ModelGraph<float> load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open model file " + path.string());
    try {
        return load_model(is);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace anomaly
