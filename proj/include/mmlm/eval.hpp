#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmlm/decode.hpp"
#include "mmlm/prompts.hpp"
#include "mmlm/rng.hpp"

// Evaluation protocols: close-ended scoring, constrained and open
// generation, matrix-completion selection, two-stage rationale prompting,
// plus the metrics and report plumbing shared by every task.

namespace mmlm::eval {

// Backend the protocols run against. Everything is deterministic: same
// backend state, same prompt, same result.
class ScoreModel {
  public:
    virtual ~ScoreModel() = default;
    // Total log-probability of the continuation bytes after the prompt.
    virtual double score(const MultimodalDocument& prompt, const std::string& continuation) = 0;
    // Free generation; beam == 1 is greedy. Returns the decoded text.
    virtual std::string generate(const MultimodalDocument& prompt, size_t max_new,
                                 size_t beam) = 0;
    // Trie-constrained generation over a closed label set.
    virtual std::string generate_constrained(const MultimodalDocument& prompt,
                                             const std::vector<std::string>& labels,
                                             size_t beam) = 0;
};

// Real backend over a trained model checkpoint.
template <class T>
class LmScoreModel final : public ScoreModel {
  public:
    explicit LmScoreModel(MultimodalLM<T>& lm) : lm_(lm) {}

    double score(const MultimodalDocument& prompt, const std::string& continuation) override {
        auto unit = encode_prompt(prompt, soft_tokens());
        auto cont = tok::tokenize(continuation);
        return lm_.score_continuation(unit, cont);
    }

    std::string generate(const MultimodalDocument& prompt, size_t max_new,
                         size_t beam) override {
        auto unit = encode_prompt(prompt, soft_tokens());
        LmSession<T> session(lm_, unit);
        DecodeResult res = beam <= 1 ? greedy_decode(session, unit.ids, max_new)
                                     : beam_decode(session, unit.ids, max_new, beam);
        return text_of(res.tokens);
    }

    std::string generate_constrained(const MultimodalDocument& prompt,
                                     const std::vector<std::string>& labels,
                                     size_t beam) override {
        auto unit = encode_prompt(prompt, soft_tokens());
        LmSession<T> session(lm_, unit);
        LabelTrie trie(labels);
        auto res = constrained_beam_decode(session, unit.ids, trie, beam);
        return labels[static_cast<size_t>(res.label)];
    }

  private:
    size_t soft_tokens() const { return lm_.config().decoder.soft_tokens; }

    // Byte ids become text; any stray special id is dropped rather than
    // poisoning the transcript.
    static std::string text_of(const std::vector<int32_t>& ids) {
        std::string out;
        for (int32_t id : ids)
            if (id >= 0 && id < tok::kByteCount) out.push_back(static_cast<char>(id));
        return out;
    }

    MultimodalLM<T>& lm_;
};

// Mock backend: every score is a uniform draw fully determined by the seed,
// the rendered prompt, and the continuation. Gives protocol tests a random
// but replayable scorer.
class RandomScoreModel final : public ScoreModel {
  public:
    explicit RandomScoreModel(uint64_t seed) : seed_(seed) {}

    double score(const MultimodalDocument& prompt, const std::string& continuation) override;
    std::string generate(const MultimodalDocument& prompt, size_t max_new, size_t beam) override;
    std::string generate_constrained(const MultimodalDocument& prompt,
                                     const std::vector<std::string>& labels,
                                     size_t beam) override;

  private:
    uint64_t seed_;
};

// One matrix-completion instance: the given images, six candidates, and
// which candidate is correct.
struct RavenInstance {
    std::string id;
    std::vector<ImageTensor> given;      // 3, 4, or 8 images
    std::vector<ImageTensor> candidates; // exactly 6
    int answer_index = 0;

    void validate() const;
};

struct RavenOptions {
    // Score the full word "Yes" (default) or only its first byte.
    bool full_word = true;
};

// Yes-scores for all six candidates, in candidate order.
std::vector<double> raven_scores(const RavenInstance& inst, ScoreModel& model,
                                 RavenOptions opts = {});

// Argmax over raven_scores; ties go to the lowest candidate index.
int raven_predict(const RavenInstance& inst, ScoreModel& model, RavenOptions opts = {});

// Close-ended choice: argmax over score(prompt, " " + option); ties go to
// the lowest option index.
size_t score_options(ScoreModel& model, const MultimodalDocument& prompt,
                     std::span<const std::string> options);

struct CotResult {
    std::string rationale;
    std::string answer;
};

// Stage 1 describes the picture; stage 2 embeds that output verbatim and
// asks the sentiment question close-ended over positive/negative.
CotResult cot_two_stage(const ImageTensor& image, ScoreModel& model, size_t max_new = 64);

// Constrained classification from "The photo of the".
std::string classify_constrained(const ImageTensor& image, const std::vector<std::string>& labels,
                                 ScoreModel& model, size_t beam = 2);

// Open variant of the same prompt, exact-match scored by the caller.
std::string classify_open(const ImageTensor& image, ScoreModel& model, size_t beam = 2,
                          size_t max_new = 32);

// Description-conditioned classification, close-ended over option names.
std::string classify_with_descriptions(const ImageTensor& image,
                                       std::span<const prompts::DescribedOption> options,
                                       const std::string& general_category, ScoreModel& model,
                                       bool with_descriptions = true);

// Lowercase, collapse whitespace runs, trim ends.
std::string normalize_answer(const std::string& s);

// Equality after normalization.
bool exact_match(const std::string& pred, const std::string& gold);

// Bag-of-tokens F1 after normalization. Both empty scores 1, one empty 0.
double token_f1(const std::string& pred, const std::string& gold);

// Rank-based area under the ROC curve with average ranks on ties. Labels
// must contain both classes.
double roc_auc(std::span<const double> scores, std::span<const uint8_t> labels);

struct EvalRecord {
    std::string id;
    std::string prediction;
    std::string reference;
    std::vector<std::pair<std::string, double>> metrics;
};

struct EvalReport {
    std::string task;
    uint64_t seed = 0;
    std::vector<EvalRecord> records;
    std::vector<std::pair<std::string, double>> aggregate;

    std::string to_json() const;
};

// Dataset rows, one struct per task family.
struct CaptionExample {
    std::string id;
    ImageTensor image;
    std::string caption;
};

struct VqaExample {
    std::string id;
    ImageTensor image;
    std::string question;
    std::vector<std::string> answers;
};

struct LabelExample {
    std::string id;
    ImageTensor image;
    std::string label;
};

struct WebsrcExample {
    std::string id;
    std::optional<ImageTensor> image;
    std::string web_text;
    std::string question;
    std::string answer;
};

struct DescribedExample {
    std::string id;
    ImageTensor image;
    std::string label;
    std::string general_category;
    std::vector<prompts::DescribedOption> options;
};

struct LangExample {
    std::string id;
    std::string prompt;
    std::vector<std::string> options;
    size_t answer_index = 0;
};

// JSON Lines loaders; images travel as base64 PNG.
std::vector<CaptionExample> load_caption_jsonl(const std::string& path);
std::vector<VqaExample> load_vqa_jsonl(const std::string& path);
std::vector<LabelExample> load_label_jsonl(const std::string& path);
std::vector<WebsrcExample> load_websrc_jsonl(const std::string& path);
std::vector<DescribedExample> load_described_jsonl(const std::string& path);
std::vector<RavenInstance> load_raven_jsonl(const std::string& path);
std::vector<LangExample> load_lang_jsonl(const std::string& path);

struct EvalOptions {
    uint64_t seed = 0;
    size_t shots = 0;       // demonstrations for caption and vqa
    size_t beam = 0;        // 0 keeps the task default
    size_t max_new = 0;     // 0 keeps the task default
    bool with_descriptions = true; // description-conditioned classification
    bool constrained = true;       // label-set classification
    bool full_word_yes = true;     // matrix-completion scoring
};

EvalReport run_caption(std::span<const CaptionExample> data, ScoreModel& model, EvalOptions opts);
EvalReport run_vqa(std::span<const VqaExample> data, ScoreModel& model, EvalOptions opts);
EvalReport run_sst2(std::span<const LabelExample> data, ScoreModel& model, EvalOptions opts);
EvalReport run_hateful(std::span<const LabelExample> data, ScoreModel& model, EvalOptions opts);
EvalReport run_websrc(std::span<const WebsrcExample> data, ScoreModel& model, EvalOptions opts);
EvalReport run_imagenet(std::span<const LabelExample> data, ScoreModel& model, EvalOptions opts);
EvalReport run_cub(std::span<const DescribedExample> data, ScoreModel& model, EvalOptions opts);
EvalReport run_raven(std::span<const RavenInstance> data, ScoreModel& model, EvalOptions opts);
EvalReport run_lang(std::span<const LangExample> data, ScoreModel& model, EvalOptions opts);

// Loads the task's dataset from path and runs it. Task names match the CLI:
// caption, vqa, sst2, hateful, websrc, imagenet, cub, raven, lang.
EvalReport run_task(const std::string& task, const std::string& data_path, ScoreModel& model,
                    EvalOptions opts);

} // namespace mmlm::eval
