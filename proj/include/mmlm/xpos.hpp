#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mmlm/errors.hpp"

// Rotary relative positions with symmetric exponential scaling. Queries are
// scaled by zeta^(+n/B) and keys by zeta^(-n/B), so a query/key pair at
// distance d contributes zeta^(d/B): attention logits depend only on the
// offset, and far-away content is damped by a per-channel decay envelope.

namespace mmlm {

struct XPosParams {
    double theta_base = 10000.0; // rotary frequency base
    double gamma = 0.4;          // blends per-pair decay toward 1
    double scale_base = 512.0;   // positions per e-fold of the exponent
};

// Per-pair decay factor. Pair index i in [0, d/2), d = head dimension.
// Low-frequency pairs sit near 1 and barely decay; high-frequency ones decay
// hardest. All factors are in (0, 1].
inline double xpos_zeta(size_t pair, size_t head_dim, const XPosParams& p) {
    const double half = static_cast<double>(head_dim) / 2.0;
    const double frac = static_cast<double>(pair) / half; // 2i/d
    return (frac + p.gamma) / (1.0 + p.gamma);
}

// Precomputed per-position rotation and scaling, laid out [rows x d/2].
// Built once per distinct position list and reused across forward passes.
template <class T>
struct XPosTable {
    size_t head_dim = 0;
    size_t rows = 0;
    std::vector<T> cosv, sinv, qscale, kscale;
};

template <class T>
XPosTable<T> make_xpos_table(size_t head_dim, std::span<const int64_t> positions, const XPosParams& p = {}) {
    if (head_dim == 0 || head_dim % 2 != 0)
        throw ShapeError("xpos head dimension must be a positive even number");
    XPosTable<T> t;
    t.head_dim = head_dim;
    t.rows = positions.size();
    const size_t half = head_dim / 2;
    t.cosv.resize(t.rows * half);
    t.sinv.resize(t.rows * half);
    t.qscale.resize(t.rows * half);
    t.kscale.resize(t.rows * half);
    for (size_t r = 0; r < t.rows; ++r) {
        const double pos = static_cast<double>(positions[r]);
        for (size_t i = 0; i < half; ++i) {
            const double theta = std::pow(p.theta_base, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
            const double angle = pos * theta;
            const double zeta = xpos_zeta(i, head_dim, p);
            const double scale = std::pow(zeta, pos / p.scale_base);
            t.cosv[r * half + i] = static_cast<T>(std::cos(angle));
            t.sinv[r * half + i] = static_cast<T>(std::sin(angle));
            t.qscale[r * half + i] = static_cast<T>(scale);
            t.kscale[r * half + i] = static_cast<T>(1.0 / scale);
        }
    }
    return t;
}

// Applies rotation and scaling to one [rows x head_dim] slab in place-free
// form: out may not alias x. sign selects the query (+) or key (-) scaling.
template <class T>
void xpos_apply(const T* x, T* out, const XPosTable<T>& t, bool query) {
    const size_t half = t.head_dim / 2;
    for (size_t r = 0; r < t.rows; ++r) {
        const T* xr = x + r * t.head_dim;
        T* orow = out + r * t.head_dim;
        const T* c = t.cosv.data() + r * half;
        const T* s = t.sinv.data() + r * half;
        const T* sc = (query ? t.qscale : t.kscale).data() + r * half;
        for (size_t i = 0; i < half; ++i) {
            const T x0 = xr[2 * i], x1 = xr[2 * i + 1];
            orow[2 * i] = (x0 * c[i] - x1 * s[i]) * sc[i];
            orow[2 * i + 1] = (x0 * s[i] + x1 * c[i]) * sc[i];
        }
    }
}

// Upper bound on the magnitude contribution of content with per-pair energy
// e at offset delta: sum_i e_i * zeta_i^(delta/B). Non-increasing in delta
// when all e_i >= 0.
inline double xpos_decay_envelope(size_t head_dim, std::span<const double> pair_energy, double delta,
                                  const XPosParams& p = {}) {
    const size_t half = head_dim / 2;
    if (pair_energy.size() != half)
        throw ShapeError("pair energy must have head_dim/2 entries");
    double acc = 0.0;
    for (size_t i = 0; i < half; ++i) {
        if (pair_energy[i] < 0.0) throw DataError("pair energy must be nonnegative");
        acc += pair_energy[i] * std::pow(xpos_zeta(i, head_dim, p), delta / p.scale_base);
    }
    return acc;
}

} // namespace mmlm
