#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mmlm/errors.hpp"

// Dense math kernels. Everything here is scalar-templated and runs on raw
// pointers; shape checking lives one layer up. Reductions always run
// left to right in index order so results are bit-reproducible for a given
// build, and masked variants never touch excluded entries, so a padding
// value can never leak into a result even as a signed zero.

namespace mmlm::kernels {

// c[m x n] = a[m x k] * b[k x n], overwriting c.
template <class T>
inline void matmul(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) ci[j] = T(0);
        const T* ai = a + i * k;
        for (size_t p = 0; p < k; ++p) {
            const T av = ai[p];
            const T* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// c[m x n] += a[m x k] * b[k x n].
template <class T>
inline void matmul_acc(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        T* ci = c + i * n;
        const T* ai = a + i * k;
        for (size_t p = 0; p < k; ++p) {
            const T av = ai[p];
            const T* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// c[m x n] = a[m x k] * b[n x k]^T. Rows of both operands are contiguous.
template <class T>
inline void matmul_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        T* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const T* bj = b + j * k;
            T acc = T(0);
            for (size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

// c[m x n] += a[m x k] * b[n x k]^T.
template <class T>
inline void matmul_nt_acc(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        T* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const T* bj = b + j * k;
            T acc = T(0);
            for (size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

// c[m x n] += a[k x m]^T * b[k x n]. Used for weight gradients.
template <class T>
inline void matmul_tn_acc(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
    for (size_t p = 0; p < k; ++p) {
        const T* ap = a + p * m;
        const T* bp = b + p * n;
        for (size_t i = 0; i < m; ++i) {
            const T av = ap[i];
            T* ci = c + i * n;
            for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// Numerically stable softmax along the last axis of a [rows x width] slab.
template <class T>
inline void softmax_rows(const T* x, T* out, size_t rows, size_t width) {
    if (width == 0) throw ShapeError("softmax over empty axis");
    for (size_t i = 0; i < rows; ++i) {
        const T* xi = x + i * width;
        T* oi = out + i * width;
        T mx = xi[0];
        for (size_t j = 1; j < width; ++j)
            if (xi[j] > mx) mx = xi[j];
        T sum = T(0);
        for (size_t j = 0; j < width; ++j) {
            oi[j] = std::exp(xi[j] - mx);
            sum += oi[j];
        }
        const T inv = T(1) / sum;
        for (size_t j = 0; j < width; ++j) oi[j] *= inv;
    }
}

// Row-wise log-softmax, same layout as softmax_rows.
template <class T>
inline void log_softmax_row(const T* x, T* out, size_t width) {
    if (width == 0) throw ShapeError("log-softmax over empty axis");
    T mx = x[0];
    for (size_t j = 1; j < width; ++j)
        if (x[j] > mx) mx = x[j];
    T sum = T(0);
    for (size_t j = 0; j < width; ++j) sum += std::exp(x[j] - mx);
    const T lse = mx + std::log(sum);
    for (size_t j = 0; j < width; ++j) out[j] = x[j] - lse;
}

// Softmax restricted to allowed entries. allowed is a [rows x width] byte
// mask; excluded entries of out are set to exactly zero without ever being
// part of the max/sum, and a row with nothing allowed is an error.
template <class T>
inline void masked_softmax_rows(const T* x, const uint8_t* allowed, T* out, size_t rows, size_t width) {
    for (size_t i = 0; i < rows; ++i) {
        const T* xi = x + i * width;
        const uint8_t* mi = allowed + i * width;
        T* oi = out + i * width;
        bool any = false;
        T mx = T(0);
        for (size_t j = 0; j < width; ++j) {
            if (!mi[j]) continue;
            if (!any || xi[j] > mx) mx = xi[j];
            any = true;
        }
        if (!any) throw ShapeError("softmax row " + std::to_string(i) + " has no allowed entries");
        T sum = T(0);
        for (size_t j = 0; j < width; ++j) {
            if (mi[j]) {
                oi[j] = std::exp(xi[j] - mx);
                sum += oi[j];
            } else {
                oi[j] = T(0);
            }
        }
        const T inv = T(1) / sum;
        for (size_t j = 0; j < width; ++j)
            if (mi[j]) oi[j] *= inv;
    }
}

// out[i] = sum over allowed j of p[i][j] * v[j], skipping excluded entries
// entirely. p is [rows x width], v is [width x dim], out is [rows x dim].
template <class T>
inline void masked_weighted_sum(const T* p, const uint8_t* allowed, const T* v, T* out, size_t rows,
                                size_t width, size_t dim) {
    for (size_t i = 0; i < rows; ++i) {
        T* oi = out + i * dim;
        for (size_t d = 0; d < dim; ++d) oi[d] = T(0);
        const T* pi = p + i * width;
        const uint8_t* mi = allowed + i * width;
        for (size_t j = 0; j < width; ++j) {
            if (!mi[j]) continue;
            const T w = pi[j];
            const T* vj = v + j * dim;
            for (size_t d = 0; d < dim; ++d) oi[d] += w * vj[d];
        }
    }
}

// Layer norm with population variance over each row of a [rows x width]
// slab. mean/inv_std outputs are per row and are what backward needs.
template <class T>
inline void layer_norm_rows(const T* x, const T* gain, const T* bias, T eps, T* out, T* mean_out,
                            T* inv_std_out, size_t rows, size_t width) {
    if (width == 0) throw ShapeError("layer norm over empty row");
    for (size_t i = 0; i < rows; ++i) {
        const T* xi = x + i * width;
        T* oi = out + i * width;
        T mean = T(0);
        for (size_t j = 0; j < width; ++j) mean += xi[j];
        mean /= static_cast<T>(width);
        T var = T(0);
        for (size_t j = 0; j < width; ++j) {
            const T d = xi[j] - mean;
            var += d * d;
        }
        var /= static_cast<T>(width);
        const T inv = T(1) / std::sqrt(var + eps);
        for (size_t j = 0; j < width; ++j) oi[j] = (xi[j] - mean) * inv * gain[j] + bias[j];
        if (mean_out) mean_out[i] = mean;
        if (inv_std_out) inv_std_out[i] = inv;
    }
}

// Exact GeLU, x * Phi(x) with the Gaussian CDF.
template <class T>
inline T gelu(T x) {
    return x * T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440084436210485)));
}

template <class T>
inline T gelu_grad(T x) {
    const T phi_cdf = T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440084436210485)));
    const T pdf = T(0.39894228040143267793994605993438) * std::exp(T(-0.5) * x * x);
    return phi_cdf + x * pdf;
}

} // namespace mmlm::kernels
