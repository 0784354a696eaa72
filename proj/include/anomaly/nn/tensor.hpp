#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "anomaly/core/error.hpp"

namespace anomaly {

/// Extents of a rank-4 NCHW tensor. Vectors and matrices use trailing ones,
/// e.g. a batch of dense activations is (N, U, 1, 1).
struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    constexpr std::size_t size() const { return n * c * h * w; }
    constexpr std::size_t per_sample() const { return c * h * w; }
    constexpr std::size_t plane() const { return h * w; }
    constexpr bool operator==(const Shape&) const = default;

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.size()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.str());
        }
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() & { return data_; }
    std::span<const T> values() const& { return data_; }
    std::span<const T> values() && = delete;  // would dangle
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return data_[index(n, c, h, w)]; }
    const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[index(n, c, h, w)];
    }

    // Contiguous view of sample n.
    std::span<T> sample(std::size_t n) { return {data_.data() + n * shape_.per_sample(), shape_.per_sample()}; }
    std::span<const T> sample(std::size_t n) const {
        return {data_.data() + n * shape_.per_sample(), shape_.per_sample()};
    }

    /// Same data, new extents; the element count must be preserved.
    Tensor reshaped(Shape shape) const& {
        if (shape.size() != shape_.size()) {
            throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
        }
        return Tensor(shape, data_);
    }
    Tensor reshaped(Shape shape) && {
        if (shape.size() != shape_.size()) {
            throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
        }
        return Tensor(shape, std::move(data_));
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_{};
    std::vector<T> data_;
};

/// Stack single-sample tensors (all of the same C,H,W) into one batch.
template <class T>
Tensor<T> stack(std::span<const Tensor<T>* const> items) {
    if (items.empty()) return {};
    Shape s = items.front()->shape();
    const std::size_t per = s.per_sample();
    std::size_t total = 0;
    for (const auto* t : items) {
        if (t->shape().per_sample() != per || t->shape().c != s.c || t->shape().h != s.h) {
            throw ShapeError("stack: mismatched sample shape " + t->shape().str() + " vs " + s.str());
        }
        total += t->shape().n;
    }
    Tensor<T> out(Shape{total, s.c, s.h, s.w});
    std::size_t offset = 0;
    for (const auto* t : items) {
        std::copy(t->data(), t->data() + t->size(), out.data() + offset);
        offset += t->size();
    }
    return out;
}

/// Copy sample n out of a batch as a (1,C,H,W) tensor.
template <class T>
Tensor<T> slice_sample(const Tensor<T>& batch, std::size_t n) {
    const Shape& s = batch.shape();
    auto view = batch.sample(n);
    return Tensor<T>(Shape{1, s.c, s.h, s.w}, std::vector<T>(view.begin(), view.end()));
}

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
    std::vector<To> out(t.size());
    std::transform(t.values().begin(), t.values().end(), out.begin(), [](From v) { return static_cast<To>(v); });
    return Tensor<To>(t.shape(), std::move(out));
}

}  // namespace anomaly
