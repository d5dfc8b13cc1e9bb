#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mmlm/block.hpp"
#include "mmlm/stream.hpp"

namespace mmlm {

// Patch-based image encoder: images are resized to a square canvas, cut into
// non-overlapping patches, linearly embedded, tagged with learned positions,
// and run through bidirectional transformer blocks. Everything below the last
// block is frozen; the last block and the final norm stay trainable.

struct PatchEncoderConfig {
    size_t image_size = 32;
    size_t patch_size = 8;
    size_t embed_dim = 32;
    size_t depth = 2;
    size_t heads = 2;
    size_t ffn_width = 128;
    double ln_eps = 1e-5;
    bool freeze_below_last = true;

    static PatchEncoderConfig desk() { return PatchEncoderConfig{}; }

    static PatchEncoderConfig paper() {
        PatchEncoderConfig cfg;
        cfg.image_size = 224;
        cfg.patch_size = 14;
        cfg.embed_dim = 1024;
        cfg.depth = 24;
        cfg.heads = 16;
        cfg.ffn_width = 4096;
        return cfg;
    }

    size_t patches_per_side() const { return image_size / patch_size; }
    size_t patch_count() const { return patches_per_side() * patches_per_side(); }
    size_t patch_dim() const { return patch_size * patch_size * 3; }

    void validate() const {
        if (image_size == 0 || patch_size == 0 || image_size % patch_size != 0)
            throw DataError("image size must be a positive multiple of the patch size");
        if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0)
            throw DataError("patch embed dim must be a positive multiple of the head count");
        if ((embed_dim / heads) % 2 != 0) throw DataError("patch head dimension must be even");
        if (ffn_width == 0) throw DataError("patch feed-forward width must be positive");
        if (depth == 0) throw DataError("patch encoder needs at least one block");
    }
};

template <class T>
class PatchEncoder {
  public:
    PatchEncoder(const PatchEncoderConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(derive_seed(seed, 0x76697331ULL)); // "vis1"
        const size_t pd = cfg_.patch_dim(), e = cfg_.embed_dim, p = cfg_.patch_count();
        patch_w_ = xavier_normal<T>(pd, e, T(1), rng);
        patch_b_ = Tensor<T>::zeros({e}, true);
        pos_ = Tensor<T>::randn({p, e}, rng, T(1) / std::sqrt(static_cast<T>(e)), true);
        blocks_.reserve(cfg_.depth);
        for (size_t i = 0; i < cfg_.depth; ++i)
            blocks_.push_back(TransformerBlock<T>::make(e, cfg_.ffn_width, cfg_.heads, T(1), rng,
                                                        static_cast<T>(cfg_.ln_eps)));
        final_g_ = Tensor<T>::full({e}, T(1), true);
        final_b_ = Tensor<T>::zeros({e}, true);
        if (cfg_.freeze_below_last) apply_freeze();
    }

    const PatchEncoderConfig& config() const { return cfg_; }

    // Patch features for one image, [patch_count x embed_dim].
    Tensor<T> forward(Tape<T>& tape, const ImageTensor& image) {
        ImageTensor canvas = resize_bilinear(image, cfg_.image_size, cfg_.image_size);
        auto patches = extract_patches(canvas);
        auto x = tape.add_bias_rows(tape.matmul(patches, patch_w_), patch_b_);
        x = tape.add(x, pos_);
        auto allowed = full_mask(cfg_.patch_count());
        last_counts_.assign(cfg_.depth, LnCounts{});
        for (size_t i = 0; i < cfg_.depth; ++i)
            x = blocks_[i].forward(tape, x, nullptr, allowed, false, T(0), nullptr, &last_counts_[i]);
        return tape.layer_norm(x, final_g_, final_b_, static_cast<T>(cfg_.ln_eps));
    }

    const std::vector<LnCounts>& ln_counts() const { return last_counts_; }

    // Frozen parameters keep requires_grad false so nothing flows into them.
    void apply_freeze() {
        patch_w_.set_requires_grad(false);
        patch_b_.set_requires_grad(false);
        pos_.set_requires_grad(false);
        for (size_t i = 0; i + 1 < blocks_.size(); ++i)
            blocks_[i].visit("", [](const std::string&, Tensor<T>& t) { t.set_requires_grad(false); });
    }

    template <class Fn>
    void visit_params(Fn&& fn) {
        fn(std::string("patch.w"), patch_w_);
        fn(std::string("patch.b"), patch_b_);
        fn(std::string("pos"), pos_);
        for (size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit("block" + std::to_string(i), fn);
        fn(std::string("final_ln.gain"), final_g_);
        fn(std::string("final_ln.bias"), final_b_);
    }

    // Row-major patches, each flattened y, x, channel.
    Tensor<T> extract_patches(const ImageTensor& canvas) const {
        const size_t ps = cfg_.patch_size, side = cfg_.patches_per_side();
        auto out = Tensor<T>::zeros({side * side, cfg_.patch_dim()});
        T* dst = out.data();
        for (size_t py = 0; py < side; ++py)
            for (size_t px = 0; px < side; ++px) {
                T* row = dst + (py * side + px) * cfg_.patch_dim();
                size_t k = 0;
                for (size_t dy = 0; dy < ps; ++dy)
                    for (size_t dx = 0; dx < ps; ++dx)
                        for (size_t c = 0; c < 3; ++c)
                            row[k++] = static_cast<T>(canvas.at(py * ps + dy, px * ps + dx, c));
            }
        return out;
    }

  private:
    static ByteMask full_mask(size_t n) {
        return std::make_shared<std::vector<uint8_t>>(n * n, uint8_t(1));
    }

    PatchEncoderConfig cfg_;
    Tensor<T> patch_w_, patch_b_, pos_;
    std::vector<TransformerBlock<T>> blocks_;
    Tensor<T> final_g_, final_b_;
    std::vector<LnCounts> last_counts_;
};

// Latent-query resampler: a fixed set of learned latent vectors cross-attends
// to however many patch features arrive and always returns exactly that many
// output rows, bridging variable-size images to a fixed soft-token budget.

struct ResamplerConfig {
    size_t latent_count = 8;
    size_t width = 64;     // output width, matches the decoder
    size_t input_dim = 32; // incoming patch feature width
    size_t heads = 2;
    size_t ffn_width = 256;
    size_t depth = 1;
    double ln_eps = 1e-5;

    static ResamplerConfig desk() { return ResamplerConfig{}; }

    static ResamplerConfig paper() {
        ResamplerConfig cfg;
        cfg.latent_count = 64;
        cfg.width = 2048;
        cfg.input_dim = 1024;
        cfg.heads = 32;
        cfg.ffn_width = 8192;
        return cfg;
    }

    void validate() const {
        if (latent_count == 0) throw DataError("resampler needs at least one latent");
        if (width == 0 || heads == 0 || width % heads != 0)
            throw DataError("resampler width must be a positive multiple of the head count");
        if ((width / heads) % 2 != 0) throw DataError("resampler head dimension must be even");
        if (input_dim == 0) throw DataError("resampler input dim must be positive");
        if (ffn_width == 0) throw DataError("resampler feed-forward width must be positive");
        if (depth == 0) throw DataError("resampler needs at least one block");
    }
};

template <class T>
class Resampler {
  public:
    Resampler(const ResamplerConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(derive_seed(seed, 0x72736d70ULL)); // "rsmp"
        const size_t w = cfg_.width, e = cfg_.input_dim;
        latents_ = Tensor<T>::randn({cfg_.latent_count, w}, rng, T(1) / std::sqrt(static_cast<T>(w)), true);
        in_g_ = Tensor<T>::full({e}, T(1), true);
        in_b_ = Tensor<T>::zeros({e}, true);
        blocks_.reserve(cfg_.depth);
        for (size_t i = 0; i < cfg_.depth; ++i) {
            CrossBlock blk;
            blk.ln_g = Tensor<T>::full({w}, T(1), true);
            blk.ln_b = Tensor<T>::zeros({w}, true);
            blk.wq = xavier_normal<T>(w, w, T(1), rng);
            blk.bq = Tensor<T>::zeros({w}, true);
            blk.wk = xavier_normal<T>(e, w, T(1), rng);
            blk.bk = Tensor<T>::zeros({w}, true);
            blk.wv = xavier_normal<T>(e, w, T(1), rng);
            blk.bv = Tensor<T>::zeros({w}, true);
            blk.inner_g = Tensor<T>::full({w}, T(1), true);
            blk.inner_b = Tensor<T>::zeros({w}, true);
            blk.wo = xavier_normal<T>(w, w, T(1), rng);
            blk.bo = Tensor<T>::zeros({w}, true);
            blk.ffn_ln_g = Tensor<T>::full({w}, T(1), true);
            blk.ffn_ln_b = Tensor<T>::zeros({w}, true);
            blk.w1 = xavier_normal<T>(w, cfg_.ffn_width, T(1), rng);
            blk.b1 = Tensor<T>::zeros({cfg_.ffn_width}, true);
            blk.ffn_inner_g = Tensor<T>::full({cfg_.ffn_width}, T(1), true);
            blk.ffn_inner_b = Tensor<T>::zeros({cfg_.ffn_width}, true);
            blk.w2 = xavier_normal<T>(cfg_.ffn_width, w, T(1), rng);
            blk.b2 = Tensor<T>::zeros({w}, true);
            blocks_.push_back(std::move(blk));
        }
        final_g_ = Tensor<T>::full({w}, T(1), true);
        final_b_ = Tensor<T>::zeros({w}, true);
    }

    const ResamplerConfig& config() const { return cfg_; }

    // features is [N x input_dim] for any N >= 1; the result is always
    // [latent_count x width]. probs, when given, collects every attention
    // matrix ([latent_count x N], one per block and head).
    Tensor<T> forward(Tape<T>& tape, Tensor<T> features, std::vector<Tensor<T>>* probs = nullptr) {
        if (features.rank() != 2 || features.cols() != cfg_.input_dim)
            throw ShapeError("resampler expects [n x input_dim] features");
        const size_t n = features.rows();
        const size_t w = cfg_.width, heads = cfg_.heads, d = w / heads;
        const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));
        auto allowed = std::make_shared<std::vector<uint8_t>>(cfg_.latent_count * n, uint8_t(1));

        auto f = tape.layer_norm(features, in_g_, in_b_, static_cast<T>(cfg_.ln_eps));
        auto x = latents_;
        for (const auto& blk : blocks_) {
            auto h = tape.layer_norm(x, blk.ln_g, blk.ln_b, static_cast<T>(cfg_.ln_eps));
            auto q = tape.add_bias_rows(tape.matmul(h, blk.wq), blk.bq);
            auto k = tape.add_bias_rows(tape.matmul(f, blk.wk), blk.bk);
            auto v = tape.add_bias_rows(tape.matmul(f, blk.wv), blk.bv);
            std::vector<Tensor<T>> ctx_heads;
            ctx_heads.reserve(heads);
            for (size_t hd = 0; hd < heads; ++hd) {
                auto qh = tape.slice_cols(q, hd * d, d);
                auto kh = tape.slice_cols(k, hd * d, d);
                auto vh = tape.slice_cols(v, hd * d, d);
                auto s = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_d);
                auto p = tape.masked_softmax(s, allowed);
                if (probs) probs->push_back(p);
                ctx_heads.push_back(tape.masked_weighted_sum(p, vh, allowed));
            }
            auto ctx = tape.concat_cols(ctx_heads);
            auto inner = tape.layer_norm(ctx, blk.inner_g, blk.inner_b, static_cast<T>(cfg_.ln_eps));
            x = tape.add(x, tape.add_bias_rows(tape.matmul(inner, blk.wo), blk.bo));
            auto h2 = tape.layer_norm(x, blk.ffn_ln_g, blk.ffn_ln_b, static_cast<T>(cfg_.ln_eps));
            auto u = tape.gelu(tape.add_bias_rows(tape.matmul(h2, blk.w1), blk.b1));
            auto u2 = tape.layer_norm(u, blk.ffn_inner_g, blk.ffn_inner_b, static_cast<T>(cfg_.ln_eps));
            x = tape.add(x, tape.add_bias_rows(tape.matmul(u2, blk.w2), blk.b2));
        }
        return tape.layer_norm(x, final_g_, final_b_, static_cast<T>(cfg_.ln_eps));
    }

    template <class Fn>
    void visit_params(Fn&& fn) {
        fn(std::string("latents"), latents_);
        fn(std::string("in_ln.gain"), in_g_);
        fn(std::string("in_ln.bias"), in_b_);
        for (size_t i = 0; i < blocks_.size(); ++i) {
            auto& blk = blocks_[i];
            const std::string p = "block" + std::to_string(i);
            fn(p + ".ln.gain", blk.ln_g);
            fn(p + ".ln.bias", blk.ln_b);
            fn(p + ".attn.wq", blk.wq);
            fn(p + ".attn.bq", blk.bq);
            fn(p + ".attn.wk", blk.wk);
            fn(p + ".attn.bk", blk.bk);
            fn(p + ".attn.wv", blk.wv);
            fn(p + ".attn.bv", blk.bv);
            fn(p + ".inner_ln.gain", blk.inner_g);
            fn(p + ".inner_ln.bias", blk.inner_b);
            fn(p + ".attn.wo", blk.wo);
            fn(p + ".attn.bo", blk.bo);
            fn(p + ".ffn_ln.gain", blk.ffn_ln_g);
            fn(p + ".ffn_ln.bias", blk.ffn_ln_b);
            fn(p + ".ffn.w1", blk.w1);
            fn(p + ".ffn.b1", blk.b1);
            fn(p + ".ffn_inner_ln.gain", blk.ffn_inner_g);
            fn(p + ".ffn_inner_ln.bias", blk.ffn_inner_b);
            fn(p + ".ffn.w2", blk.w2);
            fn(p + ".ffn.b2", blk.b2);
        }
        fn(std::string("final_ln.gain"), final_g_);
        fn(std::string("final_ln.bias"), final_b_);
    }

  private:
    struct CrossBlock {
        Tensor<T> ln_g, ln_b, wq, bq, wk, bk, wv, bv, inner_g, inner_b, wo, bo;
        Tensor<T> ffn_ln_g, ffn_ln_b, w1, b1, ffn_inner_g, ffn_inner_b, w2, b2;
    };

    ResamplerConfig cfg_;
    Tensor<T> latents_, in_g_, in_b_;
    std::vector<CrossBlock> blocks_;
    Tensor<T> final_g_, final_b_;
};

} // namespace mmlm
