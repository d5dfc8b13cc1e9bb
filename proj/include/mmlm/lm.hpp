#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmlm/adamw.hpp"
#include "mmlm/model.hpp"
#include "mmlm/vision.hpp"

namespace mmlm {

struct LmConfig {
    ModelConfig decoder;
    PatchEncoderConfig vision;
    ResamplerConfig resampler;

    static LmConfig desk() {
        return LmConfig{ModelConfig::desk(), PatchEncoderConfig::desk(), ResamplerConfig::desk()};
    }

    static LmConfig paper() {
        return LmConfig{ModelConfig::paper(), PatchEncoderConfig::paper(), ResamplerConfig::paper()};
    }

    void validate() const {
        decoder.validate();
        vision.validate();
        resampler.validate();
        if (resampler.input_dim != vision.embed_dim)
            throw DataError("resampler input dim must match the vision embed dim");
        if (resampler.width != decoder.model_width)
            throw DataError("resampler width must match the decoder width");
        if (resampler.latent_count != decoder.soft_tokens)
            throw DataError("resampler latent count must match the decoder soft token budget");
    }
};

// Full model: vision encoder -> resampler -> causal decoder over the mixed
// stream. Images referenced by a sequence's slots are embedded on the fly.
template <class T>
class MultimodalLM {
  public:
    MultimodalLM(const LmConfig& cfg, uint64_t seed)
        : cfg_(cfg),
          decoder_(cfg.decoder, derive_seed(seed, 1)),
          vision_(cfg.vision, derive_seed(seed, 2)),
          resampler_(cfg.resampler, derive_seed(seed, 3)) {
        cfg_.validate();
    }

    const LmConfig& config() const { return cfg_; }
    Decoder<T>& decoder() { return decoder_; }
    PatchEncoder<T>& vision() { return vision_; }
    Resampler<T>& resampler() { return resampler_; }

    // One soft-token matrix per image, [soft_tokens x width] each.
    std::vector<Tensor<T>> embed_images(Tape<T>& tape, const std::vector<ImageTensor>& images,
                                        std::vector<Tensor<T>>* attn_probs = nullptr) {
        std::vector<Tensor<T>> softs;
        softs.reserve(images.size());
        for (const auto& img : images)
            softs.push_back(resampler_.forward(tape, vision_.forward(tape, img), attn_probs));
        return softs;
    }

    Tensor<T> forward(Tape<T>& tape, std::span<const int32_t> ids, std::span<const ImageSlot> slots,
                      const std::vector<ImageTensor>& images, const ForwardOptions& opts = {},
                      DecoderTrace<T>* trace = nullptr) {
        auto softs = embed_images(tape, images);
        return decoder_.forward(tape, ids, slots, softs, opts, trace);
    }

    Tensor<T> forward(Tape<T>& tape, const EncodedUnit& unit, const ForwardOptions& opts = {},
                      DecoderTrace<T>* trace = nullptr) {
        return forward(tape, unit.ids, unit.slots, unit.images, opts, trace);
    }

    Tensor<T> forward(Tape<T>& tape, const PackedSequence& seq, const ForwardOptions& opts = {},
                      DecoderTrace<T>* trace = nullptr) {
        return forward(tape, seq.ids, seq.slots, seq.images, opts, trace);
    }

    // Next-token cross entropy summed over mask-true positions: position t
    // contributes -log p(ids[t] | ids[<t]), predicted from hidden row t-1.
    CeSum<T> loss_sum(Tape<T>& tape, std::span<const int32_t> ids, std::span<const ImageSlot> slots,
                      const std::vector<ImageTensor>& images, std::span<const uint8_t> mask,
                      const ForwardOptions& opts = {}) {
        if (mask.size() != ids.size()) throw ShapeError("target mask length mismatch");
        auto hidden = forward(tape, ids, slots, images, opts);
        const size_t n = ids.size();
        std::vector<int32_t> targets(n, 0);
        std::vector<uint8_t> shifted(n, 0);
        for (size_t t = 0; t + 1 < n; ++t) {
            targets[t] = ids[t + 1];
            shifted[t] = mask[t + 1];
        }
        return decoder_.loss_sum(tape, hidden, targets, shifted);
    }

    CeSum<T> loss_sum(Tape<T>& tape, const EncodedUnit& unit, const ForwardOptions& opts = {}) {
        return loss_sum(tape, unit.ids, unit.slots, unit.images, unit.target_mask, opts);
    }

    CeSum<T> loss_sum(Tape<T>& tape, const PackedSequence& seq, const ForwardOptions& opts = {}) {
        return loss_sum(tape, seq.ids, seq.slots, seq.images, seq.target_mask, opts);
    }

    // Sum of continuation log-probabilities given an encoded prompt; no tape.
    double score_continuation(const EncodedUnit& prompt, std::span<const int32_t> cont) {
        if (cont.empty()) throw DataError("cannot score an empty continuation");
        std::vector<int32_t> ids(prompt.ids.begin(), prompt.ids.end());
        const size_t start = ids.size();
        ids.insert(ids.end(), cont.begin(), cont.end());
        Tape<T> tape;
        tape.set_recording(false);
        auto hidden = forward(tape, ids, prompt.slots, prompt.images);
        double total = 0;
        for (size_t i = 0; i < cont.size(); ++i) {
            auto lp = decoder_.row_logprobs(hidden, start - 1 + i);
            total += static_cast<double>(lp[static_cast<size_t>(cont[i])]);
        }
        return total;
    }

    template <class Fn>
    void visit_params(Fn&& fn) {
        decoder_.visit_params([&](const std::string& n, Tensor<T>& t) { fn("decoder." + n, t); });
        vision_.visit_params([&](const std::string& n, Tensor<T>& t) { fn("vision." + n, t); });
        resampler_.visit_params([&](const std::string& n, Tensor<T>& t) { fn("resampler." + n, t); });
    }

    ParamList<T> named_params() {
        ParamList<T> out;
        visit_params([&](const std::string& n, Tensor<T>& t) { out.push_back({n, t}); });
        return out;
    }

    ParamList<T> trainable_params() {
        ParamList<T> out;
        visit_params([&](const std::string& n, Tensor<T>& t) {
            if (t.requires_grad()) out.push_back({n, t});
        });
        return out;
    }

  private:
    LmConfig cfg_;
    Decoder<T> decoder_;
    PatchEncoder<T> vision_;
    Resampler<T> resampler_;
};

} // namespace mmlm
