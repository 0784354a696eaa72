#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "anomaly/core/error.hpp"
#include "anomaly/nn/tensor.hpp"

namespace anomaly {

enum class Label { good, defect };
enum class Split { train, test };

inline std::string_view to_string(Label l) { return l == Label::good ? "good" : "defect"; }
inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline Label parse_label(std::string_view s) {
    if (s == "good") return Label::good;
    if (s == "defect") return Label::defect;
    throw DataError("unknown label '" + std::string(s) + "'");
}

inline Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw DataError("unknown split '" + std::string(s) + "'");
}

using Image = Tensor<float>;  // (1, C, H, W), values in [0,1]

struct ImageSample {
    Image pixels;
    Label label = Label::good;
    std::string defect_kind = "good";
    Split split = Split::train;
    std::string source_path;

    bool operator==(const ImageSample&) const = default;
};

struct Dataset {
    std::string class_name;
    std::vector<ImageSample> samples;
    std::uint64_t seed = 0;

    std::size_t count(Split s) const {
        std::size_t n = 0;
        for (const auto& x : samples) n += x.split == s ? 1 : 0;
        return n;
    }

    Dataset subset(Split s) const {
        Dataset out{class_name, {}, seed};
        for (const auto& x : samples)
            if (x.split == s) out.samples.push_back(x);
        return out;
    }

    bool operator==(const Dataset&) const = default;
};

/// Stack the pixel tensors of `samples` into one (N,C,H,W) batch.
inline Tensor<float> stack_pixels(const std::vector<ImageSample>& samples) {
    if (samples.empty()) throw DataError("cannot stack an empty sample list");
    const Shape s0 = samples.front().pixels.shape();
    Tensor<float> out(Shape{samples.size(), s0.c, s0.h, s0.w});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Shape& s = samples[i].pixels.shape();
        if (s.c != s0.c || s.h != s0.h || s.w != s0.w) {
            throw DataError("sample '" + samples[i].source_path + "' has shape " + s.str() + ", expected " + s0.str() +
                            "; preprocess the dataset first");
        }
        std::copy(samples[i].pixels.storage().begin(), samples[i].pixels.storage().end(), out.sample(i).begin());
    }
    return out;
}

}  // namespace anomaly
