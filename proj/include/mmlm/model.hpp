#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmlm/block.hpp"
#include "mmlm/stream.hpp"
#include "mmlm/tokenizer.hpp"

namespace mmlm {

struct ModelConfig {
    size_t layers = 2;
    size_t model_width = 64;
    size_t ffn_width = 256;
    size_t heads = 4;
    size_t vocab_size = tok::kVocabSize;
    size_t soft_tokens = 8; // soft tokens spliced in per image
    size_t max_len = 256;
    double dropout = 0.1;
    double ln_eps = 1e-5;
    double init_gain = 0; // 0 resolves to sqrt(log(2 * layers))
    XPosParams xpos{};

    static ModelConfig desk() { return ModelConfig{}; }

    static ModelConfig paper() {
        ModelConfig cfg;
        cfg.layers = 24;
        cfg.model_width = 2048;
        cfg.ffn_width = 8192;
        cfg.heads = 32;
        cfg.vocab_size = 64007;
        cfg.soft_tokens = 64;
        cfg.max_len = 2048;
        return cfg;
    }

    size_t head_dim() const { return model_width / heads; }

    double resolved_gain() const { return init_gain > 0 ? init_gain : std::sqrt(std::log(2.0 * layers)); }

    void validate() const {
        if (layers == 0) throw DataError("model needs at least one layer");
        if (model_width == 0 || heads == 0 || model_width % heads != 0)
            throw DataError("model width must be a positive multiple of the head count");
        if (head_dim() % 2 != 0) throw DataError("head dimension must be even for rotary pairs");
        if (ffn_width == 0) throw DataError("feed-forward width must be positive");
        if (vocab_size < tok::kVocabSize) throw DataError("vocab size must cover the token inventory");
        if (soft_tokens == 0) throw DataError("soft token count must be positive");
        if (max_len == 0) throw DataError("maximum sequence length must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw DataError("dropout must lie in [0, 1)");
        if (init_gain < 0) throw DataError("init gain must be non-negative");
    }
};

struct ForwardOptions {
    bool train = false;
    Rng* rng = nullptr; // required when train and dropout > 0
    const std::vector<int64_t>* positions = nullptr; // defaults to 0..L-1
};

template <class T>
struct DecoderTrace {
    std::vector<Tensor<T>> scores; // layer-major, head-minor
    std::vector<Tensor<T>> probs;
};

// Causal decoder over the mixed token stream. Slot positions in ids are
// replaced by rows of the supplied soft-token matrices before the first
// block; everything downstream is ordinary causal attention. The token
// embedding is tied to the output projection.
template <class T>
class Decoder {
  public:
    Decoder(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(derive_seed(seed, 0x6465636fULL)); // "deco"
        const T emb_std = T(1) / std::sqrt(static_cast<T>(cfg_.model_width));
        emb_ = Tensor<T>::randn({cfg_.vocab_size, cfg_.model_width}, rng, emb_std, true);
        const T gain = static_cast<T>(cfg_.resolved_gain());
        blocks_.reserve(cfg_.layers);
        for (size_t i = 0; i < cfg_.layers; ++i)
            blocks_.push_back(TransformerBlock<T>::make(cfg_.model_width, cfg_.ffn_width, cfg_.heads, gain,
                                                        rng, static_cast<T>(cfg_.ln_eps)));
        final_g_ = Tensor<T>::full({cfg_.model_width}, T(1), true);
        final_b_ = Tensor<T>::zeros({cfg_.model_width}, true);
    }

    const ModelConfig& config() const { return cfg_; }
    Tensor<T> embedding() { return emb_; }

    // Hidden states after the final norm, [L x width]. softs holds one
    // [soft_tokens x width] matrix per image slot.
    Tensor<T> forward(Tape<T>& tape, std::span<const int32_t> ids, std::span<const ImageSlot> slots,
                      const std::vector<Tensor<T>>& softs, const ForwardOptions& opts = {},
                      DecoderTrace<T>* trace = nullptr) {
        const size_t n = ids.size();
        if (n == 0) throw DataError("cannot run the decoder on an empty sequence");
        if (n > cfg_.max_len) throw DataError("sequence exceeds the maximum length");
        if (opts.train && cfg_.dropout > 0 && opts.rng == nullptr)
            throw DataError("training forward pass needs a random stream for dropout");

        std::vector<ComposeRef> refs(n);
        if (softs.size() < slots.size()) throw DataError("fewer soft token matrices than image slots");
        for (const auto& slot : slots) {
            if (slot.start + slot.length > n) throw DataError("image slot exceeds the sequence");
            if (slot.image_index >= softs.size()) throw DataError("image slot points past the soft tokens");
            const auto& soft = softs[slot.image_index];
            if (soft.rows() != slot.length || soft.cols() != cfg_.model_width)
                throw ShapeError("soft token matrix must be [slot length x model width]");
            for (size_t k = 0; k < slot.length; ++k) {
                refs[slot.start + k].soft_index = static_cast<ptrdiff_t>(slot.image_index);
                refs[slot.start + k].soft_row = k;
            }
        }
        for (size_t t = 0; t < n; ++t) {
            const bool is_slot = ids[t] == tok::kSlot;
            const bool routed = refs[t].soft_index >= 0;
            if (is_slot != routed)
                throw DataError("slot tokens and image slots disagree at position " + std::to_string(t));
        }

        auto x = tape.compose_rows(emb_, ids, refs, softs);
        if (opts.train && cfg_.dropout > 0) x = tape.dropout(x, static_cast<T>(cfg_.dropout), *opts.rng);

        auto xt = position_table(n, opts.positions);
        auto allowed = causal_mask(ids);
        last_counts_.assign(cfg_.layers, LnCounts{});
        for (size_t i = 0; i < cfg_.layers; ++i) {
            AttnCapture<T> cap;
            if (trace) {
                cap.scores = &trace->scores;
                cap.probs = &trace->probs;
            }
            x = blocks_[i].forward(tape, x, xt, allowed, opts.train, static_cast<T>(cfg_.dropout), opts.rng,
                                   &last_counts_[i], cap);
        }
        return tape.layer_norm(x, final_g_, final_b_, static_cast<T>(cfg_.ln_eps));
    }

    // Full [L x vocab] logit matrix through the tied embedding.
    Tensor<T> logits(Tape<T>& tape, Tensor<T> hidden) { return tape.matmul_nt(hidden, emb_); }

    // Summed cross entropy over mask-true positions plus the live count.
    CeSum<T> loss_sum(Tape<T>& tape, Tensor<T> hidden, std::span<const int32_t> targets,
                      std::span<const uint8_t> mask) {
        return tape.tied_cross_entropy_sum(hidden, emb_, targets, mask);
    }

    // Log-probabilities of the next token given one hidden row; no tape.
    std::vector<T> row_logprobs(const Tensor<T>& hidden, size_t row) const {
        if (row >= hidden.rows()) throw ShapeError("logit row out of range");
        const size_t w = hidden.cols(), v = cfg_.vocab_size;
        if (w != cfg_.model_width) throw ShapeError("hidden width mismatch");
        std::vector<T> out(v);
        const T* h = hidden.data() + row * w;
        const T* e = emb_.data();
        for (size_t j = 0; j < v; ++j) {
            T acc = 0;
            const T* er = e + j * w;
            for (size_t k = 0; k < w; ++k) acc += h[k] * er[k];
            out[j] = acc;
        }
        kernels::log_softmax_row(out.data(), out.data(), v);
        return out;
    }

    // Layer norm applications observed in the last forward pass, per layer.
    const std::vector<LnCounts>& ln_counts() const { return last_counts_; }

    template <class Fn>
    void visit_params(Fn&& fn) {
        fn(std::string("emb"), emb_);
        for (size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit("block" + std::to_string(i), fn);
        fn(std::string("final_ln.gain"), final_g_);
        fn(std::string("final_ln.bias"), final_b_);
    }

  private:
    std::shared_ptr<const XPosTable<T>> position_table(size_t n, const std::vector<int64_t>* positions) {
        if (positions) {
            if (positions->size() != n) throw ShapeError("position override length mismatch");
            auto t = std::make_shared<XPosTable<T>>(
                make_xpos_table<T>(cfg_.head_dim(), std::span<const int64_t>(*positions), cfg_.xpos));
            return t;
        }
        auto it = table_cache_.find(n);
        if (it != table_cache_.end()) return it->second;
        std::vector<int64_t> pos(n);
        for (size_t i = 0; i < n; ++i) pos[i] = static_cast<int64_t>(i);
        auto t = std::make_shared<XPosTable<T>>(
            make_xpos_table<T>(cfg_.head_dim(), std::span<const int64_t>(pos), cfg_.xpos));
        table_cache_.emplace(n, t);
        return t;
    }

    // Causal mask with padding excluded: position i may attend to j when
    // j <= i and j is not padding, except that every position may attend to
    // itself so no softmax row is empty.
    ByteMask causal_mask(std::span<const int32_t> ids) const {
        const size_t n = ids.size();
        std::vector<uint8_t> valid(n);
        for (size_t t = 0; t < n; ++t) valid[t] = ids[t] != tok::kPad ? 1 : 0;
        auto m = std::make_shared<std::vector<uint8_t>>(n * n, uint8_t(0));
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j <= i; ++j)
                if (valid[j] || j == i) (*m)[i * n + j] = 1;
        return m;
    }

    ModelConfig cfg_;
    Tensor<T> emb_;
    std::vector<TransformerBlock<T>> blocks_;
    Tensor<T> final_g_, final_b_;
    std::vector<LnCounts> last_counts_;
    std::unordered_map<size_t, std::shared_ptr<const XPosTable<T>>> table_cache_;
};

} // namespace mmlm
