#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmlm/corpus.hpp"
#include "mmlm/eval.hpp"

// Deterministic synthetic datasets: colored-shape renderings plus matching
// captions, questions, labels, matrix-completion puzzles, and training
// corpora. Everything is a pure function of its arguments, so identical
// calls yield identical bytes.

namespace mmlm::synth {

struct PaletteColor {
    std::string name;
    float r, g, b;
};

// Eight named colors and four shape kinds, in fixed order.
const std::vector<PaletteColor>& palette();
const std::vector<std::string>& shape_names();

// `count` copies of the shape laid out on a grid over a noisy background.
// bg is the background gray level; the noise never trips the single-color
// filter and keeps every (seed) rendering unique.
ImageTensor shape_image(const std::string& shape, size_t color_index, size_t image_size,
                        uint64_t seed, size_t count = 1, float bg = 0.12f);

// Caption rows: one per color x shape combination, captions like
// "a red square".
std::vector<eval::CaptionExample> make_caption_data(size_t n, size_t image_size, uint64_t seed);

// Color and shape questions over single-shape images.
std::vector<eval::VqaExample> make_vqa_data(size_t n, size_t image_size, uint64_t seed);

// Bright warm images are positive, dark cool ones negative.
std::vector<eval::LabelExample> make_sentiment_data(size_t n, size_t image_size, uint64_t seed);

// Binary yes/no marked by shape kind.
std::vector<eval::LabelExample> make_yesno_data(size_t n, size_t image_size, uint64_t seed);

// Page-extraction rows with publisher and author questions.
std::vector<eval::WebsrcExample> make_websrc_data(size_t n, size_t image_size, uint64_t seed);

// Closed-set object labels "color shape" for constrained classification.
std::vector<eval::LabelExample> make_object_data(size_t n, size_t image_size, uint64_t seed);

// Binary shape groups with verbal descriptions.
std::vector<eval::DescribedExample> make_described_data(size_t n, size_t image_size,
                                                        uint64_t seed);

// Count-progression puzzles: given images show c, c+1, ... shapes, the
// correct candidate continues the progression; decoys break it.
std::vector<eval::RavenInstance> make_raven_data(size_t n, size_t image_size, uint64_t seed);

// Text-only close-ended comparisons.
std::vector<eval::LangExample> make_lang_data(size_t n, uint64_t seed);

// Deterministic string-manipulation instruction rows.
std::vector<InstructionRow> make_instruction_data(size_t n, uint64_t seed);

// Interleaved documents that a small model can memorize: image, then the
// caption sentence "An image of a {color} {shape}." (unique per document).
std::vector<MultimodalDocument> make_overfit_corpus(size_t n, size_t image_size, uint64_t seed);

// Pre-filter corpus rows: English, two large images with interleaved text,
// so the filtering pipeline keeps every document deterministically.
std::vector<RawDocument> make_raw_corpus(size_t n, size_t image_size, uint64_t seed);

// JSONL writers matching the eval loaders; images travel as base64 PNG.
void write_caption_jsonl(const std::string& path, std::span<const eval::CaptionExample> rows);
void write_vqa_jsonl(const std::string& path, std::span<const eval::VqaExample> rows);
void write_label_jsonl(const std::string& path, std::span<const eval::LabelExample> rows);
void write_websrc_jsonl(const std::string& path, std::span<const eval::WebsrcExample> rows);
void write_described_jsonl(const std::string& path, std::span<const eval::DescribedExample> rows);
void write_raven_jsonl(const std::string& path, std::span<const eval::RavenInstance> rows);
void write_lang_jsonl(const std::string& path, std::span<const eval::LangExample> rows);

} // namespace mmlm::synth
