#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mmlm/stream.hpp"

// Web-corpus filtering: keep English documents with images interspersed in
// the text, drop tiny or single-colored images, drop gibberish-saturated
// text, cap the images per document, and randomly discard half of the
// documents left with exactly one image.

namespace mmlm {

struct RawDocument {
    std::string doc_id;
    std::string language = "en"; // crawl metadata
    MultimodalDocument content;
};

struct FilterConfig {
    size_t min_image_side = 64;     // height or width below this drops the image
    double flat_variance = 1e-4;    // max per-channel variance below this is single-colored
    size_t max_images = 5;          // survivors beyond this are removed
    double gibberish_fraction = 0.3; // flagged-token fraction at or above this drops the doc
    double single_image_drop = 0.5; // probability of dropping a one-image doc
};

enum class DropReason {
    kNone = 0,
    kNotEnglish,
    kNoInterleavedImages, // lacks images or lacks text
    kImagesGone,          // every image fell to the per-image rules
    kGibberish,
    kSingleImageCoin,
};

const char* drop_reason_name(DropReason r);

struct FilterDecision {
    bool keep = true;
    DropReason reason = DropReason::kNone;
    std::vector<size_t> small_images; // image ordinals dropped by the size floor
    std::vector<size_t> flat_images;  // image ordinals dropped as single-colored
    std::vector<size_t> capped_images; // image ordinals removed by the five-image cap
};

// True when the token trips the gibberish heuristics: a URL, a hashtag, an
// emoji codepoint, or bytes that do not decode as UTF-8.
bool is_gibberish_token(std::string_view token);

// Flagged fraction over whitespace-separated tokens of all text segments.
double gibberish_fraction(const MultimodalDocument& doc);

// True when no channel of the image has variance at or above the threshold.
bool is_single_colored(const ImageTensor& img, double variance_floor);

// Pure decision for one document; doc_index feeds the coin flip stream.
FilterDecision evaluate_document(const RawDocument& raw, const FilterConfig& cfg, uint64_t seed,
                                 uint64_t doc_index);

// The surviving document with dropped images' segments removed. The decision
// must say keep.
MultimodalDocument apply_decision(const RawDocument& raw, const FilterDecision& d);

struct PipelineStats {
    size_t input_docs = 0;
    size_t kept_docs = 0;
    size_t dropped_not_english = 0;
    size_t dropped_no_interleaved = 0;
    size_t dropped_images_gone = 0;
    size_t dropped_gibberish = 0;
    size_t dropped_single_image = 0;
    size_t images_dropped_small = 0;
    size_t images_dropped_flat = 0;
    size_t images_capped = 0;

    std::string to_json() const;
};

std::vector<MultimodalDocument> run_pipeline(const std::vector<RawDocument>& docs,
                                             const FilterConfig& cfg, uint64_t seed,
                                             PipelineStats* stats = nullptr);

// Document archive: "mmar" magic, version, then per-record payloads guarded
// by crc32. Round trips byte-exactly.
void write_doc_archive(std::ostream& out, const std::vector<MultimodalDocument>& docs);
std::vector<MultimodalDocument> read_doc_archive(std::istream& in);

// JSONL ingest: one document per line, {"id": ..., "language": ...,
// "segments": [{"text": ...} | {"image_png_b64": ...}, ...]}.
std::vector<RawDocument> read_jsonl_corpus(std::istream& in);
void write_jsonl_corpus(std::ostream& out, const std::vector<RawDocument>& docs);

// Instruction-tuning row; only the output is a prediction target when the
// row is encoded for training.
struct InstructionRow {
    std::string instruction;
    std::string input; // may be empty
    std::string output;
};

// JSONL with {"instruction": ..., "input": ..., "output": ...} per line.
std::vector<InstructionRow> read_instruction_jsonl(std::istream& in);
void write_instruction_jsonl(std::ostream& out, const std::vector<InstructionRow>& rows);

} // namespace mmlm
