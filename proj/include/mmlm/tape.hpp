#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "mmlm/kernels.hpp"
#include "mmlm/rng.hpp"
#include "mmlm/tensor.hpp"
#include "mmlm/xpos.hpp"

// Reverse-mode autodiff over a recorded list of closures. Each op computes
// its forward result eagerly, and, when recording is on and an input wants
// gradients, pushes one closure that routes output gradients back to input
// gradient buffers. backward() replays the closures in reverse. There is no
// batch axis; models run per sequence and accumulate parameter gradients
// across sequences because parameter grad buffers persist between tapes.

namespace mmlm {

// Attention masks are shared immutable byte matrices so closures can hold
// them without copying.
using ByteMask = std::shared_ptr<const std::vector<uint8_t>>;

// One position of composed model input: table row, or a row of the k-th
// soft-token matrix.
struct ComposeRef {
    int32_t soft_index = -1; // -1 means discrete token
    int32_t soft_row = 0;
};

template <class T>
struct CeSum {
    Tensor<T> sum;    // scalar, sum of negative log-likelihoods
    size_t count = 0; // number of positions that contributed
};

template <class T>
class Tape {
  public:
    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    size_t node_count() const { return nodes_.size(); }

    // ---- elementwise / shape ----

    Tensor<T> add(Tensor<T> a, Tensor<T> b) {
        if (a.shape() != b.shape())
            throw ShapeError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
        Tensor<T> out = Tensor<T>::zeros(a.shape());
        const T* pa = a.data();
        const T* pb = b.data();
        T* po = out.data();
        for (size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
        if (wants_grad(out, {&a, &b})) {
            record([a, b, out]() mutable {
                const T* g = out.grad();
                if (a.requires_grad()) {
                    T* ga = a.grad();
                    for (size_t i = 0; i < a.size(); ++i) ga[i] += g[i];
                }
                if (b.requires_grad()) {
                    T* gb = b.grad();
                    for (size_t i = 0; i < b.size(); ++i) gb[i] += g[i];
                }
            });
        }
        return out;
    }

    // x[r x c] plus a length-c bias broadcast over rows.
    Tensor<T> add_bias_rows(Tensor<T> x, Tensor<T> bias) {
        x.require_rank(2);
        bias.require_rank(1);
        if (bias.dim(0) != x.cols())
            throw ShapeError("bias width " + std::to_string(bias.dim(0)) + " vs " + shape_string(x.shape()));
        const size_t r = x.rows(), c = x.cols();
        Tensor<T> out = Tensor<T>::zeros({r, c});
        for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < c; ++j) out.at(i * c + j) = x.at(i * c + j) + bias.at(j);
        if (wants_grad(out, {&x, &bias})) {
            record([x, bias, out, r, c]() mutable {
                const T* g = out.grad();
                if (x.requires_grad()) {
                    T* gx = x.grad();
                    for (size_t i = 0; i < r * c; ++i) gx[i] += g[i];
                }
                if (bias.requires_grad()) {
                    T* gb = bias.grad();
                    for (size_t i = 0; i < r; ++i)
                        for (size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
                }
            });
        }
        return out;
    }

    Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
        if (a.shape() != b.shape())
            throw ShapeError("mul: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
        Tensor<T> out = Tensor<T>::zeros(a.shape());
        for (size_t i = 0; i < out.size(); ++i) out.at(i) = a.at(i) * b.at(i);
        if (wants_grad(out, {&a, &b})) {
            record([a, b, out]() mutable {
                const T* g = out.grad();
                if (a.requires_grad()) {
                    T* ga = a.grad();
                    for (size_t i = 0; i < a.size(); ++i) ga[i] += g[i] * b.at(i);
                }
                if (b.requires_grad()) {
                    T* gb = b.grad();
                    for (size_t i = 0; i < b.size(); ++i) gb[i] += g[i] * a.at(i);
                }
            });
        }
        return out;
    }

    Tensor<T> sum_all(Tensor<T> x) {
        Tensor<T> out = Tensor<T>::zeros({1});
        T acc = T(0);
        for (size_t i = 0; i < x.size(); ++i) acc += x.at(i);
        out.at(0) = acc;
        if (wants_grad(out, {&x})) {
            record([x, out]() mutable {
                const T g = out.grad()[0];
                T* gx = x.grad();
                for (size_t i = 0; i < x.size(); ++i) gx[i] += g;
            });
        }
        return out;
    }

    Tensor<T> scale(Tensor<T> x, T s) {
        Tensor<T> out = Tensor<T>::zeros(x.shape());
        for (size_t i = 0; i < x.size(); ++i) out.at(i) = x.at(i) * s;
        if (wants_grad(out, {&x})) {
            record([x, out, s]() mutable {
                const T* g = out.grad();
                T* gx = x.grad();
                for (size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * s;
            });
        }
        return out;
    }

    // ---- matmul family (row-major; weights live as [in x out]) ----

    Tensor<T> matmul(Tensor<T> a, Tensor<T> b) {
        a.require_rank(2);
        b.require_rank(2);
        if (a.cols() != b.rows())
            throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
        const size_t m = a.rows(), k = a.cols(), n = b.cols();
        Tensor<T> out = Tensor<T>::zeros({m, n});
        kernels::matmul(a.data(), b.data(), out.data(), m, k, n);
        if (wants_grad(out, {&a, &b})) {
            record([a, b, out, m, k, n]() mutable {
                const T* g = out.grad();
                if (a.requires_grad()) kernels::matmul_nt_acc(g, b.data(), a.grad(), m, n, k);
                if (b.requires_grad()) kernels::matmul_tn_acc(a.data(), g, b.grad(), k, m, n);
            });
        }
        return out;
    }

    // a[m x k] times b[n x k] transposed; used where both operands are
    // naturally row-major, like attention scores and tied output logits.
    Tensor<T> matmul_nt(Tensor<T> a, Tensor<T> b) {
        a.require_rank(2);
        b.require_rank(2);
        if (a.cols() != b.cols())
            throw ShapeError("matmul_nt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()) + "^T");
        const size_t m = a.rows(), k = a.cols(), n = b.rows();
        Tensor<T> out = Tensor<T>::zeros({m, n});
        kernels::matmul_nt(a.data(), b.data(), out.data(), m, k, n);
        if (wants_grad(out, {&a, &b})) {
            record([a, b, out, m, k, n]() mutable {
                const T* g = out.grad();
                if (a.requires_grad()) kernels::matmul_acc(g, b.data(), a.grad(), m, n, k);
                if (b.requires_grad()) kernels::matmul_tn_acc(g, a.data(), b.grad(), n, m, k);
            });
        }
        return out;
    }

    // ---- normalization / activation ----

    Tensor<T> layer_norm(Tensor<T> x, Tensor<T> gain, Tensor<T> bias, T eps) {
        x.require_rank(2);
        const size_t r = x.rows(), w = x.cols();
        if (gain.size() != w || bias.size() != w)
            throw ShapeError("layer norm params must have width " + std::to_string(w));
        Tensor<T> out = Tensor<T>::zeros({r, w});
        std::vector<T> mean(r), inv(r);
        kernels::layer_norm_rows(x.data(), gain.data(), bias.data(), eps, out.data(), mean.data(), inv.data(), r,
                                 w);
        if (wants_grad(out, {&x, &gain, &bias})) {
            record([x, gain, bias, out, mean = std::move(mean), inv = std::move(inv), r, w]() mutable {
                const T* g = out.grad();
                for (size_t i = 0; i < r; ++i) {
                    const T* gi = g + i * w;
                    const T* xi = x.data() + i * w;
                    const T mu = mean[i], is = inv[i];
                    if (gain.requires_grad() || bias.requires_grad()) {
                        T* gg = gain.requires_grad() ? gain.grad() : nullptr;
                        T* gb = bias.requires_grad() ? bias.grad() : nullptr;
                        for (size_t j = 0; j < w; ++j) {
                            if (gg) gg[j] += gi[j] * (xi[j] - mu) * is;
                            if (gb) gb[j] += gi[j];
                        }
                    }
                    if (x.requires_grad()) {
                        // population-variance layer norm backward
                        T sum_h = T(0), sum_hx = T(0);
                        for (size_t j = 0; j < w; ++j) {
                            const T h = gi[j] * gain.at(j);
                            sum_h += h;
                            sum_hx += h * (xi[j] - mu) * is;
                        }
                        const T mh = sum_h / static_cast<T>(w);
                        const T mhx = sum_hx / static_cast<T>(w);
                        T* gx = x.grad() + i * w;
                        for (size_t j = 0; j < w; ++j) {
                            const T h = gi[j] * gain.at(j);
                            const T xhat = (xi[j] - mu) * is;
                            gx[j] += is * (h - mh - xhat * mhx);
                        }
                    }
                }
            });
        }
        return out;
    }

    Tensor<T> gelu(Tensor<T> x) {
        Tensor<T> out = Tensor<T>::zeros(x.shape());
        for (size_t i = 0; i < x.size(); ++i) out.at(i) = kernels::gelu(x.at(i));
        if (wants_grad(out, {&x})) {
            record([x, out]() mutable {
                const T* g = out.grad();
                T* gx = x.grad();
                for (size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * kernels::gelu_grad(x.at(i));
            });
        }
        return out;
    }

    // Inverted dropout: kept entries are scaled by 1/(1-p) so eval needs no
    // rescaling. p = 0 is the identity and records nothing.
    Tensor<T> dropout(Tensor<T> x, T p, Rng& rng) {
        if (p < T(0) || p >= T(1)) throw DataError("dropout probability must be in [0, 1)");
        if (p == T(0)) return x;
        Tensor<T> out = Tensor<T>::zeros(x.shape());
        std::vector<T> factor(x.size());
        const T keep = T(1) / (T(1) - p);
        for (size_t i = 0; i < x.size(); ++i) {
            factor[i] = (static_cast<T>(rng.next_double()) < p) ? T(0) : keep;
            out.at(i) = x.at(i) * factor[i];
        }
        if (wants_grad(out, {&x})) {
            record([x, out, factor = std::move(factor)]() mutable {
                const T* g = out.grad();
                T* gx = x.grad();
                for (size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * factor[i];
            });
        }
        return out;
    }

    // ---- column slicing (head split / merge) ----

    Tensor<T> slice_cols(Tensor<T> x, size_t start, size_t len) {
        x.require_rank(2);
        const size_t r = x.rows(), c = x.cols();
        if (start + len > c) throw ShapeError("column slice out of range");
        Tensor<T> out = Tensor<T>::zeros({r, len});
        for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < len; ++j) out.at(i * len + j) = x.at(i * c + start + j);
        if (wants_grad(out, {&x})) {
            record([x, out, start, len, r, c]() mutable {
                const T* g = out.grad();
                T* gx = x.grad();
                for (size_t i = 0; i < r; ++i)
                    for (size_t j = 0; j < len; ++j) gx[i * c + start + j] += g[i * len + j];
            });
        }
        return out;
    }

    Tensor<T> concat_cols(std::vector<Tensor<T>> parts) {
        if (parts.empty()) throw ShapeError("concat of no tensors");
        const size_t r = parts[0].rows();
        size_t total = 0;
        for (const auto& p : parts) {
            p.require_rank(2);
            if (p.rows() != r) throw ShapeError("concat parts disagree on rows");
            total += p.cols();
        }
        Tensor<T> out = Tensor<T>::zeros({r, total});
        size_t off = 0;
        for (const auto& p : parts) {
            const size_t c = p.cols();
            for (size_t i = 0; i < r; ++i)
                for (size_t j = 0; j < c; ++j) out.at(i * total + off + j) = p.at(i * c + j);
            off += c;
        }
        bool any = false;
        for (const auto& p : parts) any = any || p.requires_grad();
        if (recording_ && any) {
            out.set_requires_grad(true);
            record([parts, out, r, total]() mutable {
                const T* g = out.grad();
                size_t off = 0;
                for (auto& p : parts) {
                    const size_t c = p.cols();
                    if (p.requires_grad()) {
                        T* gp = p.grad();
                        for (size_t i = 0; i < r; ++i)
                            for (size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * total + off + j];
                    }
                    off += c;
                }
            });
        }
        return out;
    }

    // ---- positions ----

    Tensor<T> xpos(Tensor<T> x, std::shared_ptr<const XPosTable<T>> table, bool query) {
        x.require_rank(2);
        if (x.rows() != table->rows || x.cols() != table->head_dim)
            throw ShapeError("xpos table built for different geometry");
        Tensor<T> out = Tensor<T>::zeros(x.shape());
        xpos_apply(x.data(), out.data(), *table, query);
        if (wants_grad(out, {&x})) {
            record([x, out, table, query]() mutable {
                const size_t half = table->head_dim / 2;
                const T* g = out.grad();
                T* gx = x.grad();
                for (size_t r = 0; r < table->rows; ++r) {
                    const T* c = table->cosv.data() + r * half;
                    const T* s = table->sinv.data() + r * half;
                    const T* sc = (query ? table->qscale : table->kscale).data() + r * half;
                    const T* gr = g + r * table->head_dim;
                    T* gxr = gx + r * table->head_dim;
                    for (size_t i = 0; i < half; ++i) {
                        const T g0 = gr[2 * i] * sc[i], g1 = gr[2 * i + 1] * sc[i];
                        gxr[2 * i] += g0 * c[i] + g1 * s[i];
                        gxr[2 * i + 1] += -g0 * s[i] + g1 * c[i];
                    }
                }
            });
        }
        return out;
    }

    // ---- masked attention ----

    // Softmax over allowed entries only. Disallowed entries never enter the
    // max, the sum, or the output, so changing them cannot perturb a single
    // bit of the allowed part.
    Tensor<T> masked_softmax(Tensor<T> s, ByteMask allowed) {
        s.require_rank(2);
        const size_t r = s.rows(), c = s.cols();
        if (allowed->size() != r * c) throw ShapeError("attention mask size mismatch");
        Tensor<T> out = Tensor<T>::zeros({r, c});
        kernels::masked_softmax_rows(s.data(), allowed->data(), out.data(), r, c);
        if (wants_grad(out, {&s})) {
            record([s, out, allowed, r, c]() mutable {
                const T* g = out.grad();
                T* gs = s.grad();
                for (size_t i = 0; i < r; ++i) {
                    const uint8_t* mi = allowed->data() + i * c;
                    const T* pi = out.data() + i * c;
                    const T* gi = g + i * c;
                    T dot = T(0);
                    for (size_t j = 0; j < c; ++j)
                        if (mi[j]) dot += gi[j] * pi[j];
                    for (size_t j = 0; j < c; ++j)
                        if (mi[j]) gs[i * c + j] += pi[j] * (gi[j] - dot);
                }
            });
        }
        return out;
    }

    // out[i] = sum over allowed j of p[i][j] * v[j]; the masked counterpart
    // of P times V with the same never-touch-excluded guarantee.
    Tensor<T> masked_weighted_sum(Tensor<T> p, Tensor<T> v, ByteMask allowed) {
        p.require_rank(2);
        v.require_rank(2);
        const size_t r = p.rows(), c = p.cols(), d = v.cols();
        if (v.rows() != c) throw ShapeError("weighted sum: value count disagrees with weight width");
        if (allowed->size() != r * c) throw ShapeError("attention mask size mismatch");
        Tensor<T> out = Tensor<T>::zeros({r, d});
        kernels::masked_weighted_sum(p.data(), allowed->data(), v.data(), out.data(), r, c, d);
        if (wants_grad(out, {&p, &v})) {
            record([p, v, out, allowed, r, c, d]() mutable {
                const T* g = out.grad();
                for (size_t i = 0; i < r; ++i) {
                    const uint8_t* mi = allowed->data() + i * c;
                    const T* gi = g + i * d;
                    for (size_t j = 0; j < c; ++j) {
                        if (!mi[j]) continue;
                        if (p.requires_grad()) {
                            T acc = T(0);
                            const T* vj = v.data() + j * d;
                            for (size_t k = 0; k < d; ++k) acc += gi[k] * vj[k];
                            p.grad()[i * c + j] += acc;
                        }
                        if (v.requires_grad()) {
                            const T w = p.at(i * c + j);
                            T* gv = v.grad() + j * d;
                            for (size_t k = 0; k < d; ++k) gv[k] += w * gi[k];
                        }
                    }
                }
            });
        }
        return out;
    }

    // ---- embedding composition ----

    // Builds the model input matrix: row t is either a row of the embedding
    // table (discrete token) or a row of one of the soft-token matrices.
    Tensor<T> compose_rows(Tensor<T> table, std::span<const int32_t> ids,
                           std::span<const ComposeRef> refs, std::vector<Tensor<T>> softs) {
        table.require_rank(2);
        const size_t L = ids.size(), w = table.cols();
        if (refs.size() != L) throw ShapeError("compose refs must align with ids");
        Tensor<T> out = Tensor<T>::zeros({L, w});
        for (size_t t = 0; t < L; ++t) {
            const T* src;
            if (refs[t].soft_index < 0) {
                const auto id = ids[t];
                if (id < 0 || static_cast<size_t>(id) >= table.rows())
                    throw DataError("token id " + std::to_string(id) + " outside embedding table");
                src = table.data() + static_cast<size_t>(id) * w;
            } else {
                const auto& s = softs.at(static_cast<size_t>(refs[t].soft_index));
                if (s.cols() != w || static_cast<size_t>(refs[t].soft_row) >= s.rows())
                    throw ShapeError("soft token block does not fit its slot");
                src = s.data() + static_cast<size_t>(refs[t].soft_row) * w;
            }
            T* dst = out.data() + t * w;
            for (size_t j = 0; j < w; ++j) dst[j] = src[j];
        }
        bool any = table.requires_grad();
        for (const auto& s : softs) any = any || s.requires_grad();
        if (recording_ && any) {
            out.set_requires_grad(true);
            std::vector<int32_t> ids_copy(ids.begin(), ids.end());
            std::vector<ComposeRef> refs_copy(refs.begin(), refs.end());
            record([table, out, softs, ids_copy = std::move(ids_copy), refs_copy = std::move(refs_copy),
                    L, w]() mutable {
                const T* g = out.grad();
                for (size_t t = 0; t < L; ++t) {
                    const T* gt = g + t * w;
                    if (refs_copy[t].soft_index < 0) {
                        if (!table.requires_grad()) continue;
                        T* dst = table.grad() + static_cast<size_t>(ids_copy[t]) * w;
                        for (size_t j = 0; j < w; ++j) dst[j] += gt[j];
                    } else {
                        auto& s = softs[static_cast<size_t>(refs_copy[t].soft_index)];
                        if (!s.requires_grad()) continue;
                        T* dst = s.grad() + static_cast<size_t>(refs_copy[t].soft_row) * w;
                        for (size_t j = 0; j < w; ++j) dst[j] += gt[j];
                    }
                }
            });
        }
        return out;
    }

    // ---- loss ----

    // Sum of negative log-likelihoods of targets[t] under the tied-head
    // distribution softmax(hidden[t] . table^T), restricted to mask-true
    // rows. Rows with mask false are never read, so corrupting their target
    // values cannot change the loss in any bit.
    CeSum<T> tied_cross_entropy_sum(Tensor<T> hidden, Tensor<T> table,
                                    std::span<const int32_t> targets, std::span<const uint8_t> mask) {
        hidden.require_rank(2);
        table.require_rank(2);
        const size_t L = hidden.rows(), w = hidden.cols(), vocab = table.rows();
        if (table.cols() != w) throw ShapeError("embedding width disagrees with hidden width");
        if (targets.size() != L || mask.size() != L) throw ShapeError("targets and mask must align with rows");

        std::vector<size_t> live;
        for (size_t t = 0; t < L; ++t)
            if (mask[t]) live.push_back(t);

        CeSum<T> result;
        result.count = live.size();
        result.sum = Tensor<T>::zeros({1});

        std::vector<T> logits(vocab), probs_store;
        const bool rec = recording_ && (hidden.requires_grad() || table.requires_grad());
        if (rec) probs_store.resize(live.size() * vocab);
        T acc = T(0);
        for (size_t li = 0; li < live.size(); ++li) {
            const size_t t = live[li];
            const int32_t y = targets[t];
            if (y < 0 || static_cast<size_t>(y) >= vocab)
                throw DataError("target id " + std::to_string(y) + " outside vocabulary");
            kernels::matmul_nt(hidden.data() + t * w, table.data(), logits.data(), 1, w, vocab);
            kernels::log_softmax_row(logits.data(), logits.data(), vocab);
            acc += -logits[static_cast<size_t>(y)];
            if (rec)
                for (size_t vI = 0; vI < vocab; ++vI) probs_store[li * vocab + vI] = std::exp(logits[vI]);
        }
        result.sum.at(0) = acc;

        if (rec) {
            result.sum.set_requires_grad(true);
            std::vector<int32_t> tgt(targets.begin(), targets.end());
            Tensor<T> sum_t = result.sum;
            record([hidden, table, sum_t, live = std::move(live), probs = std::move(probs_store),
                    tgt = std::move(tgt), w, vocab]() mutable {
                const T gscale = sum_t.grad()[0];
                for (size_t li = 0; li < live.size(); ++li) {
                    const size_t t = live[li];
                    const T* p = probs.data() + li * vocab;
                    const size_t y = static_cast<size_t>(tgt[t]);
                    // d loss / d logit_v = p_v - [v == y]
                    if (hidden.requires_grad()) {
                        T* gh = hidden.grad() + t * w;
                        for (size_t vI = 0; vI < vocab; ++vI) {
                            const T d = gscale * (p[vI] - (vI == y ? T(1) : T(0)));
                            const T* ev = table.data() + vI * w;
                            for (size_t j = 0; j < w; ++j) gh[j] += d * ev[j];
                        }
                    }
                    if (table.requires_grad()) {
                        const T* h = hidden.data() + t * w;
                        for (size_t vI = 0; vI < vocab; ++vI) {
                            const T d = gscale * (p[vI] - (vI == y ? T(1) : T(0)));
                            T* gv = table.grad() + vI * w;
                            for (size_t j = 0; j < w; ++j) gv[j] += d * h[j];
                        }
                    }
                }
            });
        }
        return result;
    }

    // Mean negative log-likelihood over mask-true positions.
    Tensor<T> masked_cross_entropy(Tensor<T> logits, std::span<const int32_t> targets,
                                   std::span<const uint8_t> mask) {
        logits.require_rank(2);
        const size_t L = logits.rows(), vocab = logits.cols();
        if (targets.size() != L || mask.size() != L) throw ShapeError("targets and mask must align with rows");
        size_t count = 0;
        for (size_t t = 0; t < L; ++t)
            if (mask[t]) ++count;
        if (count == 0) throw DataError("loss mask selects no target positions");

        Tensor<T> out = Tensor<T>::zeros({1});
        std::vector<T> lsm(vocab), probs_store;
        std::vector<size_t> live;
        const bool rec = recording_ && logits.requires_grad();
        T acc = T(0);
        for (size_t t = 0; t < L; ++t) {
            if (!mask[t]) continue;
            const int32_t y = targets[t];
            if (y < 0 || static_cast<size_t>(y) >= vocab)
                throw DataError("target id " + std::to_string(y) + " outside vocabulary");
            kernels::log_softmax_row(logits.data() + t * vocab, lsm.data(), vocab);
            acc += -lsm[static_cast<size_t>(y)];
            if (rec) {
                live.push_back(t);
                for (size_t vI = 0; vI < vocab; ++vI) probs_store.push_back(std::exp(lsm[vI]));
            }
        }
        out.at(0) = acc / static_cast<T>(count);
        if (rec) {
            out.set_requires_grad(true);
            std::vector<int32_t> tgt(targets.begin(), targets.end());
            record([logits, out, live = std::move(live), probs = std::move(probs_store), tgt = std::move(tgt),
                    vocab, count]() mutable {
                const T gscale = out.grad()[0] / static_cast<T>(count);
                for (size_t li = 0; li < live.size(); ++li) {
                    const size_t t = live[li];
                    const T* p = probs.data() + li * vocab;
                    const size_t y = static_cast<size_t>(tgt[t]);
                    T* gl = logits.grad() + t * vocab;
                    for (size_t vI = 0; vI < vocab; ++vI) gl[vI] += gscale * (p[vI] - (vI == y ? T(1) : T(0)));
                }
            });
        }
        return out;
    }

    // Seeds the root gradient with 1 and replays recorded closures in
    // reverse. The tape is consumed.
    void backward(Tensor<T>& root) {
        if (root.size() != 1) throw ShapeError("backward root must be a scalar");
        if (!root.requires_grad()) throw DataError("backward root has no recorded graph");
        root.grad()[0] += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
        nodes_.clear();
    }

    void clear() { nodes_.clear(); }

  private:
    bool wants_grad(Tensor<T>& out, std::initializer_list<const Tensor<T>*> ins) {
        if (!recording_) return false;
        bool any = false;
        for (const auto* t : ins) any = any || t->requires_grad();
        if (any) out.set_requires_grad(true);
        return any;
    }

    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    bool recording_ = true;
    std::vector<std::function<void()>> nodes_;
};

} // namespace mmlm
