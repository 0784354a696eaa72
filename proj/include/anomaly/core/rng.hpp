#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace anomaly {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// FNV-1a, used only to turn a stream tag into a seed offset.
constexpr std::uint64_t tag_hash(std::string_view tag) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char ch : tag) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Seed for an independent stream derived from a base seed and a consumer tag
/// ("init", "shuffle", "noise", ...). Same inputs always give the same seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t state = base ^ tag_hash(tag);
    splitmix64(state);
    state ^= index * 0xD1B54A32D192ED03ULL;
    return splitmix64(state);
}

class Rng {
public:
    using result_type = std::mt19937_64::result_type;

    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t base, std::string_view tag, std::uint64_t index = 0)
        : engine_(derive_seed(base, tag, index)) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    // Inclusive range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
    }

    Rng fork(std::string_view tag, std::uint64_t index = 0) { return Rng(engine_(), tag, index); }

private:
    std::mt19937_64 engine_;
};

}  // namespace anomaly
