#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mmlm/adamw.hpp"
#include "mmlm/checkpoint.hpp"
#include "mmlm/lm.hpp"

namespace mmlm {

// Training sources. Instruction data is a fourth stream mixed like the rest;
// its loss is reported under the text slot of the metrics line.
enum class Source : int { kText = 0, kPair = 1, kInterleaved = 2, kInstruction = 3 };
constexpr size_t kSourceCount = 4;

struct TrainConfig {
    uint64_t seed = 42;
    std::array<size_t, kSourceCount> quotas = {1, 1, 2, 0}; // items per batch per source
    double peak_lr = 1e-3;
    size_t warmup_steps = 20;
    size_t total_steps = 200;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-6;
    double weight_decay = 0.01;
    double grad_clip = 0; // max global gradient norm, 0 disables clipping
    size_t checkpoint_every = 0; // 0 saves only at the end
    size_t log_every = 1;

    static TrainConfig desk() { return TrainConfig{}; }

    static TrainConfig paper() {
        TrainConfig cfg;
        cfg.quotas = {5, 5, 2, 0};
        cfg.peak_lr = 2e-4;
        cfg.warmup_steps = 375;
        cfg.total_steps = 300000;
        return cfg;
    }

    size_t batch_items() const {
        size_t n = 0;
        for (size_t q : quotas) n += q;
        return n;
    }

    void validate() const {
        if (batch_items() == 0) throw DataError("batch quotas select nothing");
        if (total_steps == 0) throw DataError("training needs at least one step");
        if (warmup_steps > total_steps) throw DataError("warmup cannot exceed total steps");
        if (!(peak_lr > 0)) throw DataError("peak learning rate must be positive");
        if (grad_clip < 0) throw DataError("gradient clip must be non-negative");
        if (log_every == 0) throw DataError("log interval must be positive");
    }
};

// Piecewise-linear schedule: 0 -> peak over the warmup, then peak -> 0 at the
// final step. Exact at the corners.
inline double lr_at(const TrainConfig& cfg, int64_t step) {
    if (step < 0 || step > static_cast<int64_t>(cfg.total_steps))
        throw DataError("schedule queried outside [0, total_steps]");
    const double t = static_cast<double>(step);
    const double w = static_cast<double>(cfg.warmup_steps);
    const double total = static_cast<double>(cfg.total_steps);
    if (step <= static_cast<int64_t>(cfg.warmup_steps)) {
        if (cfg.warmup_steps == 0) return cfg.peak_lr;
        return cfg.peak_lr * (t / w);
    }
    return cfg.peak_lr * ((total - t) / (total - w));
}

// Draws a fixed per-source quota each batch. Every source cycles through its
// own deterministic shuffle, reshuffled with a fresh seed each epoch, so a
// run is fully reproducible and a resume can replay its position.
class BatchMixer {
  public:
    struct Item {
        Source source = Source::kText;
        const PackedSequence* seq = nullptr;
    };

    BatchMixer(std::array<std::vector<PackedSequence>, kSourceCount> datasets,
               std::array<size_t, kSourceCount> quotas, uint64_t seed)
        : quotas_(quotas), seed_(seed) {
        if (batch_items() == 0) throw DataError("batch quotas select nothing");
        for (size_t s = 0; s < kSourceCount; ++s) {
            streams_[s].data = std::move(datasets[s]);
            if (quotas_[s] > 0 && streams_[s].data.empty())
                throw DataError("source " + std::to_string(s) + " has a quota but no data");
            if (quotas_[s] > 0) reshuffle(s);
        }
    }

    std::vector<Item> next_batch() {
        std::vector<Item> out;
        out.reserve(batch_items());
        for (size_t s = 0; s < kSourceCount; ++s)
            for (size_t k = 0; k < quotas_[s]; ++k) out.push_back({static_cast<Source>(s), draw(s)});
        return out;
    }

    void skip(size_t batches) {
        for (size_t i = 0; i < batches; ++i)
            for (size_t s = 0; s < kSourceCount; ++s)
                for (size_t k = 0; k < quotas_[s]; ++k) draw(s);
    }

    size_t batch_items() const {
        size_t n = 0;
        for (size_t q : quotas_) n += q;
        return n;
    }

  private:
    struct Stream {
        std::vector<PackedSequence> data;
        std::vector<size_t> order;
        size_t pos = 0;
        uint64_t epoch = 0;
    };

    void reshuffle(size_t s) {
        auto& st = streams_[s];
        st.order.resize(st.data.size());
        for (size_t i = 0; i < st.order.size(); ++i) st.order[i] = i;
        Rng rng(derive_seed(seed_, s + 1, st.epoch));
        rng.shuffle(st.order);
        st.pos = 0;
    }

    const PackedSequence* draw(size_t s) {
        auto& st = streams_[s];
        if (st.pos == st.order.size()) {
            st.epoch++;
            reshuffle(s);
        }
        return &st.data[st.order[st.pos++]];
    }

    std::array<Stream, kSourceCount> streams_;
    std::array<size_t, kSourceCount> quotas_;
    uint64_t seed_;
};

struct StepMetrics {
    size_t step = 0;
    double lr = 0;
    double loss = 0;                              // batch mean over target positions
    std::array<double, 3> source_losses = {0, 0, 0}; // text (incl. instruction), pair, interleaved

    std::string line() const {
        std::ostringstream os;
        os << "step=" << step << " lr=" << std::setprecision(17) << lr << " loss=" << loss
           << " source_losses=" << source_losses[0] << "," << source_losses[1] << ","
           << source_losses[2];
        return os.str();
    }
};

// One optimizer step per call: per-item tapes accumulate gradients of the
// batch-mean loss, then AdamW applies the scheduled learning rate. A
// non-finite gradient aborts before any parameter moves.
template <class T>
class Trainer {
  public:
    Trainer(MultimodalLM<T>& model, const TrainConfig& cfg,
            std::array<std::vector<PackedSequence>, kSourceCount> datasets)
        : model_(model),
          cfg_(validated(cfg)),
          params_(model.trainable_params()),
          opt_(params_, adamw_cfg()),
          mixer_(std::move(datasets), cfg.quotas, derive_seed(cfg.seed, 0x6d697865ULL)) {}

    AdamW<T>& optimizer() { return opt_; }
    ParamList<T>& params() { return params_; }

    // Fast-forwards the data and step state to just after `steps` completed
    // steps; parameters and moments come from the checkpoint.
    void resume_at(size_t steps) {
        mixer_.skip(steps);
        done_ = steps;
    }

    size_t steps_done() const { return done_; }

    StepMetrics step() {
        if (done_ >= cfg_.total_steps) throw DataError("training already ran to completion");
        auto batch = mixer_.next_batch();

        size_t total_count = 0;
        for (const auto& item : batch) total_count += target_count(*item.seq);
        if (total_count == 0) throw DataError("batch has no target positions");

        opt_.zero_grad();
        StepMetrics m;
        const size_t this_step = done_ + 1;
        std::array<double, 3> sums = {0, 0, 0};
        std::array<size_t, 3> counts = {0, 0, 0};
        double total_sum = 0;
        // dropout noise is a pure function of seed and step so resumed runs
        // line up with uninterrupted ones
        Rng step_rng(derive_seed(cfg_.seed, 0x64726f70ULL, this_step));
        for (const auto& item : batch) {
            Tape<T> tape;
            ForwardOptions opts;
            opts.train = true;
            opts.rng = &step_rng;
            auto ce = model_.loss_sum(tape, *item.seq, opts);
            auto scaled = tape.scale(ce.sum, T(1) / static_cast<T>(total_count));
            tape.backward(scaled);
            const double sum = static_cast<double>(ce.sum.at(0));
            total_sum += sum;
            const size_t slot = item.source == Source::kPair          ? 1
                                : item.source == Source::kInterleaved ? 2
                                                                      : 0;
            sums[slot] += sum;
            counts[slot] += ce.count;
        }

        m.step = this_step;
        m.lr = lr_at(cfg_, static_cast<int64_t>(this_step));
        m.loss = total_sum / static_cast<double>(total_count);
        for (size_t s = 0; s < 3; ++s)
            m.source_losses[s] = counts[s] ? sums[s] / static_cast<double>(counts[s]) : 0.0;
        if (cfg_.grad_clip > 0) clip_grads();
        opt_.step(static_cast<T>(m.lr));
        done_ = this_step;
        return m;
    }

  private:
    static TrainConfig validated(TrainConfig cfg) {
        cfg.validate();
        return cfg;
    }

    // Scales every gradient by clip/norm when the global L2 norm exceeds
    // the configured clip.
    void clip_grads() {
        double sq = 0;
        for (auto& p : params_)
            for (T g : p.value.grad_vec()) sq += static_cast<double>(g) * static_cast<double>(g);
        const double norm = std::sqrt(sq);
        if (norm <= cfg_.grad_clip) return;
        const T scale = static_cast<T>(cfg_.grad_clip / norm);
        for (auto& p : params_)
            for (T& g : p.value.grad_vec()) g *= scale;
    }

    AdamWConfig<T> adamw_cfg() const {
        AdamWConfig<T> a;
        a.beta1 = static_cast<T>(cfg_.beta1);
        a.beta2 = static_cast<T>(cfg_.beta2);
        a.eps = static_cast<T>(cfg_.eps);
        a.weight_decay = static_cast<T>(cfg_.weight_decay);
        return a;
    }

    static size_t target_count(const PackedSequence& seq) {
        size_t n = 0;
        for (size_t t = 1; t < seq.target_mask.size(); ++t) n += seq.target_mask[t] ? 1 : 0;
        return n;
    }

    MultimodalLM<T>& model_;
    TrainConfig cfg_;
    ParamList<T> params_;
    AdamW<T> opt_;
    BatchMixer mixer_;
    size_t done_ = 0;
};

// Runs (or resumes) a schedule, logging one metrics line per interval and
// checkpointing at the cadence plus once at the end. stop_after pauses a
// longer schedule at that step without altering it. Returns the final step's
// mean loss.
template <class T>
double train_loop(MultimodalLM<T>& model, const TrainConfig& cfg,
                  std::array<std::vector<PackedSequence>, kSourceCount> datasets, std::ostream* log,
                  const std::string& ckpt_stem = "", size_t resume_from = 0, size_t stop_after = 0) {
    Trainer<T> trainer(model, cfg, std::move(datasets));
    // checkpoints carry every parameter, frozen ones included, so a restored
    // model is complete; the optimizer rides along for the trainable subset
    auto all_params = model.named_params();
    if (resume_from > 0) {
        if (ckpt_stem.empty()) throw DataError("resume needs a checkpoint stem");
        load_checkpoint(ckpt_stem, all_params, &trainer.optimizer());
        trainer.resume_at(resume_from);
    }
    double last = 0;
    auto save = [&](size_t step) {
        if (ckpt_stem.empty()) return;
        std::map<std::string, std::string> meta;
        meta["train.step"] = std::to_string(step);
        save_checkpoint(ckpt_stem, all_params, &trainer.optimizer(), std::move(meta));
    };
    const size_t end = stop_after > 0 && stop_after < cfg.total_steps ? stop_after : cfg.total_steps;
    if (resume_from >= end) throw DataError("nothing to run: resume point is at or past the end");
    while (trainer.steps_done() < end) {
        auto m = trainer.step();
        last = m.loss;
        if (log && (m.step % cfg.log_every == 0 || m.step == end)) *log << m.line() << "\n";
        if (cfg.checkpoint_every > 0 && m.step % cfg.checkpoint_every == 0 && m.step != end)
            save(m.step);
    }
    save(end);
    return last;
}

} // namespace mmlm
