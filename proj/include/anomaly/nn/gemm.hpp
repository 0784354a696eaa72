#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

// Small row-major matrix kernels used by the conv/dense layers. All of them
// accumulate into C (C += op(A) * op(B)); callers zero C first when needed.
// Loop order keeps the innermost loop contiguous so the compiler vectorizes it,
// and the summation order is fixed, so results are bitwise reproducible.

namespace anomaly::gemm {

inline constexpr std::size_t kBlockK = 128;
inline constexpr std::size_t kBlockN = 1024;

/// C[M,N] += A[M,K] * B[K,N]
template <class T>
void nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    for (std::size_t k0 = 0; k0 < k; k0 += kBlockK) {
        const std::size_t k1 = std::min(k, k0 + kBlockK);
        for (std::size_t j0 = 0; j0 < n; j0 += kBlockN) {
            const std::size_t j1 = std::min(n, j0 + kBlockN);
            for (std::size_t i = 0; i < m; ++i) {
                T* __restrict crow = c + i * n;
                const T* arow = a + i * k;
                for (std::size_t kk = k0; kk < k1; ++kk) {
                    const T av = arow[kk];
                    if (av == T{}) continue;
                    const T* __restrict brow = b + kk * n;
                    for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
                }
            }
        }
    }
}

/// C[M,N] += A^T * B, with A stored as [K,M] and B as [K,N]
template <class T>
void tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    for (std::size_t j0 = 0; j0 < n; j0 += kBlockN) {
        const std::size_t j1 = std::min(n, j0 + kBlockN);
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T* arow = a + kk * m;
            const T* __restrict brow = b + kk * n;
            for (std::size_t i = 0; i < m; ++i) {
                const T av = arow[i];
                if (av == T{}) continue;
                T* __restrict crow = c + i * n;
                for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

template <class T>
T dot(const T* __restrict x, const T* __restrict y, std::size_t len) {
    constexpr std::size_t lanes = 8;
    T acc[lanes] = {};
    std::size_t i = 0;
    for (; i + lanes <= len; i += lanes) {
        for (std::size_t l = 0; l < lanes; ++l) acc[l] += x[i + l] * y[i + l];
    }
    T tail{};
    for (; i < len; ++i) tail += x[i] * y[i];
    T total = tail;
    for (std::size_t l = 0; l < lanes; ++l) total += acc[l];
    return total;
}

/// C[M,N] += A[M,K] * B^T, with B stored as [N,K]
template <class T>
void nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    if (m <= 2) {
        for (std::size_t i = 0; i < m; ++i) {
            const T* arow = a + i * k;
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += dot(arow, b + j * k, k);
        }
        return;
    }
    // Transpose B once so the product runs through the contiguous kernel.
    std::vector<T> bt(n * k);
    constexpr std::size_t tile = 32;
    for (std::size_t j0 = 0; j0 < n; j0 += tile) {
        for (std::size_t k0 = 0; k0 < k; k0 += tile) {
            for (std::size_t j = j0; j < std::min(n, j0 + tile); ++j) {
                for (std::size_t kk = k0; kk < std::min(k, k0 + tile); ++kk) bt[kk * n + j] = b[j * k + kk];
            }
        }
    }
    nn(m, n, k, a, bt.data(), c);
}

}  // namespace anomaly::gemm
