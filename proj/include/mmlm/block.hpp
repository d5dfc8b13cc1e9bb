#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "mmlm/tape.hpp"

// Transformer block in the sub-normalization arrangement: each sublayer
// normalizes its input and then normalizes again just before its output
// projection, two applications per sublayer. Initialization follows the
// matching scheme: value/output/feed-forward projections are scaled up by a
// depth-derived gain, query/key projections are not.

namespace mmlm {

struct LnCounts {
    int attn = 0;
    int ffn = 0;
};

template <class T>
struct AttnCapture {
    std::vector<Tensor<T>>* scores = nullptr; // pre-softmax logits, one per head
    std::vector<Tensor<T>>* probs = nullptr;  // post-softmax rows, one per head
};

// Xavier-normal init: std = gain * sqrt(2 / (fan_in + fan_out)).
template <class T>
Tensor<T> xavier_normal(size_t fan_in, size_t fan_out, T gain, Rng& rng) {
    const T std = gain * std::sqrt(T(2) / static_cast<T>(fan_in + fan_out));
    return Tensor<T>::randn({fan_in, fan_out}, rng, std, true);
}

template <class T>
struct TransformerBlock {
    size_t width = 0, ffn_width = 0, heads = 0;
    T ln_eps = T(1e-5);

    Tensor<T> attn_ln_g, attn_ln_b;
    Tensor<T> wq, bq, wk, bk, wv, bv; // [width x width], column blocks per head
    Tensor<T> attn_inner_g, attn_inner_b;
    Tensor<T> wo, bo;
    Tensor<T> ffn_ln_g, ffn_ln_b;
    Tensor<T> w1, b1; // [width x ffn_width]
    Tensor<T> ffn_inner_g, ffn_inner_b;
    Tensor<T> w2, b2; // [ffn_width x width]

    static TransformerBlock make(size_t width, size_t ffn_width, size_t heads, T proj_gain, Rng& rng,
                                 T ln_eps = T(1e-5)) {
        if (width == 0 || heads == 0 || width % heads != 0)
            throw ShapeError("block width must be a positive multiple of the head count");
        if ((width / heads) % 2 != 0) throw ShapeError("head dimension must be even for rotary pairs");
        TransformerBlock blk;
        blk.width = width;
        blk.ffn_width = ffn_width;
        blk.heads = heads;
        blk.ln_eps = ln_eps;
        auto ones = [&](size_t n) { return Tensor<T>::full({n}, T(1), true); };
        auto zeros = [&](size_t n) { return Tensor<T>::zeros({n}, true); };
        blk.attn_ln_g = ones(width);
        blk.attn_ln_b = zeros(width);
        blk.wq = xavier_normal<T>(width, width, T(1), rng);
        blk.bq = zeros(width);
        blk.wk = xavier_normal<T>(width, width, T(1), rng);
        blk.bk = zeros(width);
        blk.wv = xavier_normal<T>(width, width, proj_gain, rng);
        blk.bv = zeros(width);
        blk.attn_inner_g = ones(width);
        blk.attn_inner_b = zeros(width);
        blk.wo = xavier_normal<T>(width, width, proj_gain, rng);
        blk.bo = zeros(width);
        blk.ffn_ln_g = ones(width);
        blk.ffn_ln_b = zeros(width);
        blk.w1 = xavier_normal<T>(width, ffn_width, proj_gain, rng);
        blk.b1 = zeros(ffn_width);
        blk.ffn_inner_g = ones(ffn_width);
        blk.ffn_inner_b = zeros(ffn_width);
        blk.w2 = xavier_normal<T>(ffn_width, width, proj_gain, rng);
        blk.b2 = zeros(width);
        return blk;
    }

    // One block. xt is null for position-free attention (vision). allowed is
    // the [L x L] attention mask. counts, when given, receives the number of
    // layer norm applications per sublayer.
    Tensor<T> forward(Tape<T>& tape, Tensor<T> x, std::shared_ptr<const XPosTable<T>> xt, ByteMask allowed,
                      bool train, T dropout, Rng* rng, LnCounts* counts = nullptr,
                      AttnCapture<T> cap = {}) const {
        const size_t d = width / heads;
        const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));

        auto h = tape.layer_norm(x, attn_ln_g, attn_ln_b, ln_eps);
        if (counts) counts->attn++;
        auto q = tape.add_bias_rows(tape.matmul(h, wq), bq);
        auto k = tape.add_bias_rows(tape.matmul(h, wk), bk);
        auto v = tape.add_bias_rows(tape.matmul(h, wv), bv);
        std::vector<Tensor<T>> ctx_heads;
        ctx_heads.reserve(heads);
        for (size_t hd = 0; hd < heads; ++hd) {
            auto qh = tape.slice_cols(q, hd * d, d);
            auto kh = tape.slice_cols(k, hd * d, d);
            auto vh = tape.slice_cols(v, hd * d, d);
            if (xt) {
                qh = tape.xpos(qh, xt, true);
                kh = tape.xpos(kh, xt, false);
            }
            auto s = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_d);
            if (cap.scores) cap.scores->push_back(s);
            auto p = tape.masked_softmax(s, allowed);
            if (cap.probs) cap.probs->push_back(p);
            ctx_heads.push_back(tape.masked_weighted_sum(p, vh, allowed));
        }
        auto ctx = tape.concat_cols(ctx_heads);
        auto inner = tape.layer_norm(ctx, attn_inner_g, attn_inner_b, ln_eps);
        if (counts) counts->attn++;
        auto attn_out = tape.add_bias_rows(tape.matmul(inner, wo), bo);
        if (train && dropout > T(0)) attn_out = tape.dropout(attn_out, dropout, *rng);
        x = tape.add(x, attn_out);

        auto h2 = tape.layer_norm(x, ffn_ln_g, ffn_ln_b, ln_eps);
        if (counts) counts->ffn++;
        auto u = tape.gelu(tape.add_bias_rows(tape.matmul(h2, w1), b1));
        auto u2 = tape.layer_norm(u, ffn_inner_g, ffn_inner_b, ln_eps);
        if (counts) counts->ffn++;
        auto ffn_out = tape.add_bias_rows(tape.matmul(u2, w2), b2);
        if (train && dropout > T(0)) ffn_out = tape.dropout(ffn_out, dropout, *rng);
        return tape.add(x, ffn_out);
    }

    template <class Fn>
    void visit(const std::string& prefix, Fn&& fn) {
        fn(prefix + ".attn_ln.gain", attn_ln_g);
        fn(prefix + ".attn_ln.bias", attn_ln_b);
        fn(prefix + ".attn.wq", wq);
        fn(prefix + ".attn.bq", bq);
        fn(prefix + ".attn.wk", wk);
        fn(prefix + ".attn.bk", bk);
        fn(prefix + ".attn.wv", wv);
        fn(prefix + ".attn.bv", bv);
        fn(prefix + ".attn_inner_ln.gain", attn_inner_g);
        fn(prefix + ".attn_inner_ln.bias", attn_inner_b);
        fn(prefix + ".attn.wo", wo);
        fn(prefix + ".attn.bo", bo);
        fn(prefix + ".ffn_ln.gain", ffn_ln_g);
        fn(prefix + ".ffn_ln.bias", ffn_ln_b);
        fn(prefix + ".ffn.w1", w1);
        fn(prefix + ".ffn.b1", b1);
        fn(prefix + ".ffn_inner_ln.gain", ffn_inner_g);
        fn(prefix + ".ffn_inner_ln.bias", ffn_inner_b);
        fn(prefix + ".ffn.w2", w2);
        fn(prefix + ".ffn.b2", b2);
    }
};

} // namespace mmlm
