#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "anomaly/core/error.hpp"
#include "anomaly/nn/gemm.hpp"
#include "anomaly/nn/layer.hpp"
#include "anomaly/nn/tensor.hpp"

namespace anomaly::ops {

// ---------------------------------------------------------------------------
// im2col / col2im for one sample. The column matrix is [C*Kh*Kw, Ho*Wo].

struct ConvGeometry {
    std::size_t channels, height, width;
    std::size_t kernel_h, kernel_w, stride, padding;
    std::size_t out_h, out_w;

    std::size_t rows() const { return channels * kernel_h * kernel_w; }
    std::size_t cols() const { return out_h * out_w; }
};

template <class T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
    const std::size_t cols = g.cols();
    for (std::size_t c = 0; c < g.channels; ++c) {
        const T* plane = image + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                T* row = col + ((c * g.kernel_h + ky) * g.kernel_w + kx) * cols;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                              static_cast<std::ptrdiff_t>(g.padding);
                    T* out = row + oy * g.out_w;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
                        for (std::size_t ox = 0; ox < g.out_w; ++ox) out[ox] = T{};
                        continue;
                    }
                    const T* in_row = plane + static_cast<std::size_t>(iy) * g.width;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                                  static_cast<std::ptrdiff_t>(g.padding);
                        out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                                      ? T{}
                                      : in_row[static_cast<std::size_t>(ix)];
                    }
                }
            }
        }
    }
}

// Accumulates columns back into the image (image must be pre-zeroed).
template <class T>
void col2im(const T* col, const ConvGeometry& g, T* image) {
    const std::size_t cols = g.cols();
    for (std::size_t c = 0; c < g.channels; ++c) {
        T* plane = image + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const T* row = col + ((c * g.kernel_h + ky) * g.kernel_w + kx) * cols;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                              static_cast<std::ptrdiff_t>(g.padding);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                    T* out_row = plane + static_cast<std::size_t>(iy) * g.width;
                    const T* in = row + oy * g.out_w;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                                  static_cast<std::ptrdiff_t>(g.padding);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) {
                            out_row[static_cast<std::size_t>(ix)] += in[ox];
                        }
                    }
                }
            }
        }
    }
}

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

template <class T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t weight_in_channels,
                     std::size_t out_channels, const char* op) {
    require(x.shape().c == weight_in_channels, std::string(op) + ": input channel dimension " +
                                                   std::to_string(x.shape().c) + " != weight channels " +
                                                   std::to_string(weight_in_channels));
    require(b.size() == out_channels, std::string(op) + ": bias length " + std::to_string(b.size()) +
                                          " != output channels " + std::to_string(out_channels));
    require(w.shape().h >= 1 && w.shape().w >= 1, std::string(op) + ": kernel extents must be >= 1");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: weights (OutC, InC, Kh, Kw), bias (OutC)

inline ConvGeometry conv_geometry(const Shape& in, const Shape& weights, std::size_t stride, std::size_t padding) {
    return {in.c,
            in.h,
            in.w,
            weights.h,
            weights.w,
            stride,
            padding,
            conv_out_extent(in.h, weights.h, stride, padding, "height"),
            conv_out_extent(in.w, weights.w, stride, padding, "width")};
}

template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                         std::size_t padding) {
    detail::check_conv_args(x, w, b, w.shape().c, w.shape().n, "conv2d");
    const ConvGeometry g = conv_geometry(x.shape(), w.shape(), stride, padding);
    const std::size_t out_c = w.shape().n;
    Tensor<T> y(Shape{x.shape().n, out_c, g.out_h, g.out_w});
    std::vector<T> col(g.rows() * g.cols());
    for (std::size_t n = 0; n < x.shape().n; ++n) {
        im2col(x.sample(n).data(), g, col.data());
        T* out = y.sample(n).data();
        for (std::size_t o = 0; o < out_c; ++o) {
            std::fill(out + o * g.cols(), out + (o + 1) * g.cols(), b[o]);
        }
        gemm::nn(out_c, g.cols(), g.rows(), w.data(), col.data(), out);
    }
    return y;
}

/// Returns dL/dx; accumulates dL/dw and dL/db.
template <class T>
Tensor<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, std::size_t padding,
                          const Tensor<T>& dy, Tensor<T>& dw, Tensor<T>& db) {
    const ConvGeometry g = conv_geometry(x.shape(), w.shape(), stride, padding);
    const std::size_t out_c = w.shape().n;
    Tensor<T> dx(x.shape());
    std::vector<T> col(g.rows() * g.cols());
    std::vector<T> dcol(g.rows() * g.cols());
    for (std::size_t n = 0; n < x.shape().n; ++n) {
        const T* dout = dy.sample(n).data();
        for (std::size_t o = 0; o < out_c; ++o) {
            double s = 0.0;
            for (std::size_t p = 0; p < g.cols(); ++p) s += dout[o * g.cols() + p];
            db[o] += static_cast<T>(s);
        }
        im2col(x.sample(n).data(), g, col.data());
        gemm::nt(out_c, g.rows(), g.cols(), dout, col.data(), dw.data());
        std::fill(dcol.begin(), dcol.end(), T{});
        gemm::tn(g.rows(), g.cols(), out_c, w.data(), dout, dcol.data());
        col2im(dcol.data(), g, dx.sample(n).data());
    }
    return dx;
}

// ---------------------------------------------------------------------------
// conv2d_transpose: weights (InC, OutC, Kh, Kw), bias (OutC)

inline ConvGeometry conv_transpose_geometry(const Shape& in, const Shape& weights, std::size_t stride, std::size_t padding) {
    // Geometry of the forward conv that maps the (larger) output back onto the input grid.
    const std::size_t oh = conv_transpose_out_extent(in.h, weights.h, stride, padding, "height");
    const std::size_t ow = conv_transpose_out_extent(in.w, weights.w, stride, padding, "width");
    ConvGeometry g{weights.c, oh, ow, weights.h, weights.w, stride, padding, in.h, in.w};
    // With output_padding omitted the forward conv over the output reproduces the input grid exactly.
    detail::require(conv_out_extent(oh, weights.h, stride, padding, "height") == in.h &&
                        conv_out_extent(ow, weights.w, stride, padding, "width") == in.w,
                    "conv2d_transpose: inconsistent geometry");
    return g;
}

template <class T>
Tensor<T> conv2d_transpose_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                                   std::size_t padding) {
    detail::check_conv_args(x, w, b, w.shape().n, w.shape().c, "conv2d_transpose");
    const ConvGeometry g = conv_transpose_geometry(x.shape(), w.shape(), stride, padding);
    const std::size_t in_c = w.shape().n;
    const std::size_t out_c = w.shape().c;
    Tensor<T> y(Shape{x.shape().n, out_c, g.height, g.width});
    std::vector<T> col(g.rows() * g.cols());
    for (std::size_t n = 0; n < x.shape().n; ++n) {
        std::fill(col.begin(), col.end(), T{});
        gemm::tn(g.rows(), g.cols(), in_c, w.data(), x.sample(n).data(), col.data());
        T* out = y.sample(n).data();
        col2im(col.data(), g, out);
        for (std::size_t o = 0; o < out_c; ++o) {
            T* plane = out + o * g.height * g.width;
            for (std::size_t p = 0; p < g.height * g.width; ++p) plane[p] += b[o];
        }
    }
    return y;
}

template <class T>
Tensor<T> conv2d_transpose_backward(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, std::size_t padding,
                                    const Tensor<T>& dy, Tensor<T>& dw, Tensor<T>& db) {
    const ConvGeometry g = conv_transpose_geometry(x.shape(), w.shape(), stride, padding);
    const std::size_t in_c = w.shape().n;
    const std::size_t out_c = w.shape().c;
    Tensor<T> dx(x.shape());
    std::vector<T> dcol(g.rows() * g.cols());
    for (std::size_t n = 0; n < x.shape().n; ++n) {
        const T* dout = dy.sample(n).data();
        for (std::size_t o = 0; o < out_c; ++o) {
            double s = 0.0;
            const T* plane = dout + o * g.height * g.width;
            for (std::size_t p = 0; p < g.height * g.width; ++p) s += plane[p];
            db[o] += static_cast<T>(s);
        }
        im2col(dout, g, dcol.data());
        gemm::nn(in_c, g.cols(), g.rows(), w.data(), dcol.data(), dx.sample(n).data());
        gemm::nt(in_c, g.rows(), g.cols(), x.sample(n).data(), dcol.data(), dw.data());
    }
    return dx;
}

// ---------------------------------------------------------------------------
// 2x2 / stride 2 max pooling

template <class T>
Tensor<T> maxpool2d_forward(const Tensor<T>& x, OddPolicy odd, std::vector<std::size_t>* argmax = nullptr) {
    const Shape& s = x.shape();
    const Shape out_shape{s.n, s.c, pool_out_extent(s.h, odd, "height"), pool_out_extent(s.w, odd, "width")};
    Tensor<T> y(out_shape);
    if (argmax) argmax->assign(y.size(), 0);
    std::size_t o = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            const std::size_t base = (n * s.c + c) * s.h * s.w;
            for (std::size_t oy = 0; oy < out_shape.h; ++oy) {
                for (std::size_t ox = 0; ox < out_shape.w; ++ox, ++o) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t best_idx = base + (2 * oy) * s.w + 2 * ox;
                    for (std::size_t dy = 0; dy < 2; ++dy) {
                        const std::size_t iy = 2 * oy + dy;
                        if (iy >= s.h) continue;
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t ix = 2 * ox + dx;
                            if (ix >= s.w) continue;
                            const std::size_t idx = base + iy * s.w + ix;
                            if (x[idx] > best) {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    y[o] = best;
                    if (argmax) (*argmax)[o] = best_idx;
                }
            }
        }
    }
    return y;
}

template <class T>
Tensor<T> maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax, const Tensor<T>& dy) {
    Tensor<T> dx(input_shape);
    for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax[o]] += dy[o];
    return dx;
}

// ---------------------------------------------------------------------------
// dense: input flattened to (N, D), weights (U, D), bias (U)

template <class T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const std::size_t n = x.shape().n;
    const std::size_t d = x.shape().per_sample();
    const std::size_t u = w.shape().n;
    detail::require(w.shape().per_sample() == d, "dense: input dimension " + std::to_string(d) +
                                                     " != weight columns " + std::to_string(w.shape().per_sample()));
    detail::require(b.size() == u, "dense: bias length " + std::to_string(b.size()) + " != units " + std::to_string(u));
    Tensor<T> y(Shape{n, u, 1, 1});
    for (std::size_t i = 0; i < n; ++i) {
        T* row = y.data() + i * u;
        for (std::size_t j = 0; j < u; ++j) row[j] = b[j];
    }
    gemm::nt(n, u, d, x.data(), w.data(), y.data());
    return y;
}

template <class T>
Tensor<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>& dw, Tensor<T>& db) {
    const std::size_t n = x.shape().n;
    const std::size_t d = x.shape().per_sample();
    const std::size_t u = w.shape().n;
    for (std::size_t j = 0; j < u; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += dy[i * u + j];
        db[j] += static_cast<T>(s);
    }
    gemm::tn(u, d, n, dy.data(), x.data(), dw.data());
    Tensor<T> dx(x.shape());
    gemm::nn(n, d, u, dy.data(), w.data(), dx.data());
    return dx;
}

// ---------------------------------------------------------------------------
// element-wise activations

template <class T>
T sigmoid(T v) {
    if (v >= T{}) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
}

template <class T>
T activate_scalar(T v, Act fn) {
    switch (fn) {
        case Act::relu: return v > T{} ? v : T{};
        case Act::leaky_relu: return v > T{} ? v : static_cast<T>(kLeakySlope) * v;
        case Act::sigmoid: return sigmoid(v);
        case Act::tanh: return std::tanh(v);
    }
    return v;
}

template <class T>
Tensor<T> activate(const Tensor<T>& x, Act fn) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate_scalar(x[i], fn);
    return y;
}

/// dL/dx from the layer's input x, output y and upstream gradient dy.
template <class T>
Tensor<T> activate_backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy, Act fn) {
    Tensor<T> dx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        T deriv;
        switch (fn) {
            case Act::relu: deriv = x[i] > T{} ? T(1) : T{}; break;
            case Act::leaky_relu: deriv = x[i] > T{} ? T(1) : static_cast<T>(kLeakySlope); break;
            case Act::sigmoid: deriv = y[i] * (T(1) - y[i]); break;
            case Act::tanh: deriv = T(1) - y[i] * y[i]; break;
            default: deriv = T(1);
        }
        dx[i] = dy[i] * deriv;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// batch normalization over (N, H, W) per channel

enum class Mode : std::uint8_t { train, eval };

template <class T>
struct BatchNormCache {
    Tensor<T> normalized;            // x-hat
    std::vector<double> inv_std;     // per channel
    std::vector<double> batch_mean;  // per channel, train mode only
    std::vector<double> batch_var;   // biased, train mode only
};

template <class T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                            const Tensor<T>& running_mean, const Tensor<T>& running_var, double eps, Mode mode,
                            BatchNormCache<T>* cache = nullptr) {
    const Shape& s = x.shape();
    detail::require(gamma.size() == s.c && beta.size() == s.c,
                    "batchnorm: parameter length does not match channel count " + std::to_string(s.c));
    if (mode == Mode::train && s.n < 2) {
        throw ShapeError("batchnorm: train mode needs batch size >= 2 (got " + std::to_string(s.n) + ")");
    }
    const std::size_t plane = s.plane();
    const double count = static_cast<double>(s.n * plane);
    std::vector<double> mean(s.c), var(s.c), inv_std(s.c);
    for (std::size_t c = 0; c < s.c; ++c) {
        if (mode == Mode::train) {
            double sum = 0.0;
            for (std::size_t n = 0; n < s.n; ++n) {
                const T* p = x.data() + (n * s.c + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            }
            const double m = sum / count;
            double sq = 0.0;
            for (std::size_t n = 0; n < s.n; ++n) {
                const T* p = x.data() + (n * s.c + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = static_cast<double>(p[i]) - m;
                    sq += d * d;
                }
            }
            mean[c] = m;
            var[c] = sq / count;
        } else {
            mean[c] = running_mean[c];
            var[c] = running_var[c];
        }
        inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    }
    Tensor<T> y(s);
    Tensor<T> normalized(s);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            const std::size_t off = (n * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double xh = (static_cast<double>(x[off + i]) - mean[c]) * inv_std[c];
                normalized[off + i] = static_cast<T>(xh);
                y[off + i] = static_cast<T>(static_cast<double>(gamma[c]) * xh + static_cast<double>(beta[c]));
            }
        }
    }
    if (cache) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
        if (mode == Mode::train) {
            cache->batch_mean = std::move(mean);
            cache->batch_var = std::move(var);
        } else {
            cache->batch_mean.clear();
            cache->batch_var.clear();
        }
    }
    return y;
}

template <class T>
Tensor<T> batchnorm_backward(const Tensor<T>& dy, const BatchNormCache<T>& cache, const Tensor<T>& gamma, Mode mode,
                             Tensor<T>& dgamma, Tensor<T>& dbeta) {
    const Shape& s = dy.shape();
    const std::size_t plane = s.plane();
    const double count = static_cast<double>(s.n * plane);
    Tensor<T> dx(s);
    for (std::size_t c = 0; c < s.c; ++c) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
            const std::size_t off = (n * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy[off + i];
                sum_dy_xh += static_cast<double>(dy[off + i]) * cache.normalized[off + i];
            }
        }
        dgamma[c] += static_cast<T>(sum_dy_xh);
        dbeta[c] += static_cast<T>(sum_dy);
        const double g = gamma[c];
        const double k = g * cache.inv_std[c];
        for (std::size_t n = 0; n < s.n; ++n) {
            const std::size_t off = (n * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                if (mode == Mode::train) {
                    dx[off + i] = static_cast<T>(
                        k * (dy[off + i] - sum_dy / count - cache.normalized[off + i] * sum_dy_xh / count));
                } else {
                    dx[off + i] = static_cast<T>(k * dy[off + i]);
                }
            }
        }
    }
    return dx;
}

}  // namespace anomaly::ops
