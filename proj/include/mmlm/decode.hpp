#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmlm/lm.hpp"
#include "mmlm/tokenizer.hpp"

namespace mmlm {

// Anything that can score the next token given a full-sequence prefix.
class NextTokenModel {
  public:
    virtual ~NextTokenModel() = default;
    virtual size_t vocab() const = 0;
    virtual std::vector<double> next_logprobs(std::span<const int32_t> ids) = 0;
};

// Decoding view of a multimodal model with a fixed prompt context: the
// prompt's images are embedded once, then every step reruns the decoder over
// prompt plus generated suffix.
template <class T>
class LmSession : public NextTokenModel {
  public:
    LmSession(MultimodalLM<T>& lm, const EncodedUnit& prompt) : lm_(lm) {
        slots_.assign(prompt.slots.begin(), prompt.slots.end());
        Tape<T> tape;
        tape.set_recording(false);
        softs_ = lm_.embed_images(tape, prompt.images);
    }

    size_t vocab() const override { return lm_.config().decoder.vocab_size; }

    std::vector<double> next_logprobs(std::span<const int32_t> ids) override {
        Tape<T> tape;
        tape.set_recording(false);
        auto hidden = lm_.decoder().forward(tape, ids, slots_, softs_);
        auto lp = lm_.decoder().row_logprobs(hidden, hidden.rows() - 1);
        return std::vector<double>(lp.begin(), lp.end());
    }

  private:
    MultimodalLM<T>& lm_;
    std::vector<ImageSlot> slots_;
    std::vector<Tensor<T>> softs_;
};

struct DecodeResult {
    std::vector<int32_t> tokens; // generated suffix, stop token excluded
    double logprob = 0;          // sum over every emitted choice, stop included
    bool hit_stop = false;
};

// Highest logprob wins; ties go to the lowest token id.
inline size_t argmax_token(std::span<const double> lp) {
    size_t best = 0;
    for (size_t v = 1; v < lp.size(); ++v)
        if (lp[v] > lp[best]) best = v;
    return best;
}

inline DecodeResult greedy_decode(NextTokenModel& model, std::span<const int32_t> prompt,
                                  size_t max_new, int32_t stop_id = tok::kEos) {
    if (prompt.empty()) throw DataError("cannot decode from an empty prompt");
    DecodeResult res;
    std::vector<int32_t> cur(prompt.begin(), prompt.end());
    for (size_t step = 0; step < max_new; ++step) {
        auto lp = model.next_logprobs(cur);
        const size_t pick = argmax_token(lp);
        res.logprob += lp[pick];
        if (static_cast<int32_t>(pick) == stop_id) {
            res.hit_stop = true;
            break;
        }
        res.tokens.push_back(static_cast<int32_t>(pick));
        cur.push_back(static_cast<int32_t>(pick));
    }
    return res;
}

// Fixed-width beam search without length normalization. Candidate order is
// fully deterministic: better score first, then lower token id, then earlier
// parent beam.
inline DecodeResult beam_decode(NextTokenModel& model, std::span<const int32_t> prompt,
                                size_t max_new, size_t beam_width, int32_t stop_id = tok::kEos) {
    if (prompt.empty()) throw DataError("cannot decode from an empty prompt");
    if (beam_width == 0) throw DataError("beam width must be positive");

    struct Hyp {
        std::vector<int32_t> tokens;
        double score = 0;
        bool done = false;
    };
    std::vector<Hyp> beams{Hyp{}};
    for (size_t step = 0; step < max_new; ++step) {
        bool all_done = true;
        for (const auto& h : beams)
            if (!h.done) all_done = false;
        if (all_done) break;

        struct Cand {
            double score;
            size_t parent;
            int32_t token; // -1 carries a finished hypothesis forward
        };
        std::vector<Cand> cands;
        for (size_t b = 0; b < beams.size(); ++b) {
            if (beams[b].done) {
                cands.push_back({beams[b].score, b, -1});
                continue;
            }
            std::vector<int32_t> cur(prompt.begin(), prompt.end());
            cur.insert(cur.end(), beams[b].tokens.begin(), beams[b].tokens.end());
            auto lp = model.next_logprobs(cur);
            for (size_t v = 0; v < lp.size(); ++v)
                cands.push_back({beams[b].score + lp[v], b, static_cast<int32_t>(v)});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.token != b.token) return a.token < b.token;
            return a.parent < b.parent;
        });
        std::vector<Hyp> next;
        for (const auto& c : cands) {
            if (next.size() == beam_width) break;
            Hyp h = beams[c.parent];
            if (c.token >= 0) {
                h.score = c.score;
                if (c.token == stop_id)
                    h.done = true;
                else
                    h.tokens.push_back(c.token);
            }
            next.push_back(std::move(h));
        }
        beams = std::move(next);
    }

    size_t best = 0;
    for (size_t b = 1; b < beams.size(); ++b)
        if (beams[b].score > beams[best].score) best = b;
    DecodeResult res;
    res.tokens = beams[best].tokens;
    res.logprob = beams[best].score;
    res.hit_stop = beams[best].done;
    return res;
}

// Byte trie over a closed label set. Every inserted label is a terminal, so
// walking the trie greedily always ends on a complete label.
class LabelTrie {
  public:
    explicit LabelTrie(const std::vector<std::string>& labels) {
        if (labels.empty()) throw DataError("label set is empty");
        nodes_.push_back({});
        for (size_t i = 0; i < labels.size(); ++i) {
            if (labels[i].empty()) throw DataError("labels must be non-empty");
            size_t at = 0;
            for (int32_t id : tok::tokenize(labels[i])) {
                auto it = nodes_[at].children.find(id);
                if (it == nodes_[at].children.end()) {
                    nodes_.push_back({});
                    it = nodes_[at].children.emplace(id, nodes_.size() - 1).first;
                }
                at = it->second;
            }
            if (nodes_[at].label >= 0) throw DataError("duplicate label: " + labels[i]);
            nodes_[at].label = static_cast<int>(i);
        }
    }

    size_t size() const { return nodes_.size(); }
    const std::map<int32_t, size_t>& children(size_t node) const { return nodes_[node].children; }
    int label_at(size_t node) const { return nodes_[node].label; }

  private:
    struct Node {
        std::map<int32_t, size_t> children;
        int label = -1;
    };
    std::vector<Node> nodes_;
};

struct ConstrainedResult {
    std::vector<int32_t> tokens;
    double logprob = 0;
    int label = -1; // index into the label set
};

// Greedy decoding restricted to trie paths. At a terminal node that still has
// children, stopping competes against the children with the stop token's own
// logprob. Always ends on a terminal, so the emission is a complete label.
inline ConstrainedResult constrained_decode(NextTokenModel& model, std::span<const int32_t> prompt,
                                            const LabelTrie& trie, int32_t stop_id = tok::kEos) {
    if (prompt.empty()) throw DataError("cannot decode from an empty prompt");
    ConstrainedResult res;
    std::vector<int32_t> cur(prompt.begin(), prompt.end());
    size_t node = 0;
    while (true) {
        const auto& kids = trie.children(node);
        const bool terminal = trie.label_at(node) >= 0;
        if (kids.empty()) {
            if (!terminal) throw DataError("label trie has a dead end");
            res.label = trie.label_at(node);
            return res;
        }
        auto lp = model.next_logprobs(cur);
        int32_t pick = -1;
        double pick_lp = 0;
        bool stop_pick = false;
        for (const auto& [id, child] : kids) {
            const double v = lp[static_cast<size_t>(id)];
            if (pick < 0 || v > pick_lp || (v == pick_lp && id < pick)) {
                pick = id;
                pick_lp = v;
                stop_pick = false;
            }
        }
        if (terminal) {
            const double v = lp[static_cast<size_t>(stop_id)];
            if (v > pick_lp) stop_pick = true;
        }
        if (stop_pick) {
            res.logprob += lp[static_cast<size_t>(stop_id)];
            res.label = trie.label_at(node);
            return res;
        }
        res.logprob += pick_lp;
        res.tokens.push_back(pick);
        cur.push_back(pick);
        node = trie.children(node).at(pick);
    }
}

// Beam search restricted to trie paths. Hypotheses carry their trie node and
// may only extend along children; at a terminal the stop token competes as
// one more candidate. Every finished hypothesis spells a complete label.
inline ConstrainedResult constrained_beam_decode(NextTokenModel& model,
                                                 std::span<const int32_t> prompt,
                                                 const LabelTrie& trie, size_t beam_width,
                                                 int32_t stop_id = tok::kEos) {
    if (prompt.empty()) throw DataError("cannot decode from an empty prompt");
    if (beam_width == 0) throw DataError("beam width must be positive");

    struct Hyp {
        std::vector<int32_t> tokens;
        double score = 0;
        size_t node = 0;
        int done_label = -1;
    };
    std::vector<Hyp> beams{Hyp{}};
    while (true) {
        bool all_done = true;
        for (const auto& h : beams)
            if (h.done_label < 0) all_done = false;
        if (all_done) break;

        struct Cand {
            double score;
            size_t parent;
            int32_t token; // -1 carries a finished hypothesis forward
            int label;
        };
        std::vector<Cand> cands;
        for (size_t b = 0; b < beams.size(); ++b) {
            const Hyp& h = beams[b];
            if (h.done_label >= 0) {
                cands.push_back({h.score, b, -1, h.done_label});
                continue;
            }
            const auto& kids = trie.children(h.node);
            const int label = trie.label_at(h.node);
            if (kids.empty()) {
                if (label < 0) throw DataError("label trie has a dead end");
                cands.push_back({h.score, b, -1, label});
                continue;
            }
            std::vector<int32_t> cur(prompt.begin(), prompt.end());
            cur.insert(cur.end(), h.tokens.begin(), h.tokens.end());
            auto lp = model.next_logprobs(cur);
            for (const auto& [id, child] : kids)
                cands.push_back({h.score + lp[static_cast<size_t>(id)], b, id, -1});
            if (label >= 0)
                cands.push_back({h.score + lp[static_cast<size_t>(stop_id)], b, stop_id, label});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.token != b.token) return a.token < b.token;
            return a.parent < b.parent;
        });
        std::vector<Hyp> next;
        for (const auto& c : cands) {
            if (next.size() == beam_width) break;
            Hyp h = beams[c.parent];
            if (c.token < 0) {
                h.done_label = c.label; // finished, or forced by a childless terminal
            } else {
                h.score = c.score;
                if (c.label >= 0)
                    h.done_label = c.label;
                else {
                    h.tokens.push_back(c.token);
                    h.node = trie.children(h.node).at(c.token);
                }
            }
            next.push_back(std::move(h));
        }
        beams = std::move(next);
    }

    size_t best = 0;
    for (size_t b = 1; b < beams.size(); ++b)
        if (beams[b].score > beams[best].score) best = b;
    ConstrainedResult res;
    res.tokens = beams[best].tokens;
    res.logprob = beams[best].score;
    res.label = beams[best].done_label;
    return res;
}

// Deterministic mock scorer: the distribution is a pure function of the seed
// and the whole prefix, so any two decoders walking the same prefixes see
// identical numbers regardless of call order.
class HashModel : public NextTokenModel {
  public:
    HashModel(uint64_t seed, size_t vocab, double spread = 6.0)
        : seed_(seed), vocab_(vocab), spread_(spread) {
        if (vocab == 0) throw DataError("mock vocab must be positive");
    }

    size_t vocab() const override { return vocab_; }

    std::vector<double> next_logprobs(std::span<const int32_t> ids) override {
        uint64_t h = seed_;
        for (int32_t id : ids) h = derive_seed(h, static_cast<uint64_t>(id) + 1);
        std::vector<double> lp(vocab_);
        for (size_t v = 0; v < vocab_; ++v) {
            uint64_t s = derive_seed(h, v + 0x100);
            lp[v] = spread_ * (static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53);
        }
        kernels::log_softmax_row(lp.data(), lp.data(), vocab_);
        return lp;
    }

  private:
    uint64_t seed_;
    size_t vocab_;
    double spread_;
};

} // namespace mmlm
