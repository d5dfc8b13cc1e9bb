#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mmlm/errors.hpp"
#include "mmlm/tokenizer.hpp"

// Multimodal documents and their encoded token-stream form: a unit is
// <s> ... </s> with each image occupying a guarded slot of exactly V
// contiguous soft-token positions, and a target mask saying which positions
// count as prediction targets.

namespace mmlm {

// Float RGB image, row-major [height x width x channels], values in [0, 1].
struct ImageTensor {
    size_t height = 0;
    size_t width = 0;
    size_t channels = 3;
    std::vector<float> data;

    static ImageTensor filled(size_t h, size_t w, float r, float g, float b);
    void validate() const;
    float at(size_t y, size_t x, size_t c) const { return data[(y * width + x) * channels + c]; }
    float& at(size_t y, size_t x, size_t c) { return data[(y * width + x) * channels + c]; }
    bool operator==(const ImageTensor& o) const = default;
};

// Bilinear resize used to bring arbitrary corpus images to the encoder's
// expected resolution.
ImageTensor resize_bilinear(const ImageTensor& img, size_t out_h, size_t out_w);

struct Segment {
    enum class Kind { kText, kImage };
    Kind kind = Kind::kText;
    std::string text;
    ImageTensor image;

    static Segment of_text(std::string t) { return {Kind::kText, std::move(t), {}}; }
    static Segment of_image(ImageTensor img) { return {Kind::kImage, {}, std::move(img)}; }
};

// Ordered interleaving of text and images. Adjacent text segments are kept
// as written; documents with no segments are invalid for encoding.
struct MultimodalDocument {
    std::string doc_id;
    std::vector<Segment> segments;

    void add_text(std::string t) { segments.push_back(Segment::of_text(std::move(t))); }
    void add_image(ImageTensor img) { segments.push_back(Segment::of_image(std::move(img))); }
    size_t image_count() const;
    size_t text_bytes() const;
};

// Contiguous run of soft-token positions inside an encoded unit. start is
// the first soft position (just after <image>), length is always V.
struct ImageSlot {
    size_t start = 0;
    size_t length = 0;
    size_t image_index = 0;
};

struct EncodeOptions {
    // Whether <image>/</image> guard tokens are prediction targets.
    bool guards_in_loss = true;
    // Whether the closing </s> is a prediction target.
    bool eos_in_loss = true;
};

// Token-level form of one document: ids, slot table, the images the slots
// refer to, and the target mask aligned with ids. Slot interiors carry the
// placeholder id and are never targets.
struct EncodedUnit {
    std::string doc_id;
    std::vector<int32_t> ids;
    std::vector<ImageSlot> slots;
    std::vector<ImageTensor> images;
    std::vector<uint8_t> target_mask;

    size_t length() const { return ids.size(); }
};

// Fixed-length training sequence holding whole units back to back plus tail
// padding. pad_count positions at the end are <pad> with mask false.
struct PackedSequence {
    std::vector<int32_t> ids;
    std::vector<ImageSlot> slots;
    std::vector<ImageTensor> images;
    std::vector<uint8_t> target_mask;
    size_t pad_count = 0;

    size_t length() const { return ids.size(); }
};

// <s> segments </s> with soft_tokens slot positions per image.
EncodedUnit encode_document(const MultimodalDocument& doc, size_t soft_tokens, EncodeOptions opts = {});

// Inference-side encoding: <s> + segments, no closing </s>, no targets.
EncodedUnit encode_prompt(const MultimodalDocument& doc, size_t soft_tokens);

// Splits an oversized unit into well-formed units of at most max_len ids,
// never cutting through an image block. Errors when a single image block
// cannot fit even alone.
std::vector<EncodedUnit> split_to_fit(const EncodedUnit& unit, size_t max_len, EncodeOptions opts = {});

// Greedy full-sentence packing: units are placed whole, in order; when the
// next unit does not fit the sequence is closed with padding. Every output
// has length exactly seq_len.
std::vector<PackedSequence> pack_full_sentences(const std::vector<EncodedUnit>& units, size_t seq_len);

// Instruction-tuning unit: instruction, optional input, and output joined by
// single newlines; only the output bytes (and </s>) are targets.
EncodedUnit build_instruction_unit(const std::string& instruction, const std::string& input,
                                   const std::string& output, EncodeOptions opts = {});

// Structural invariants for units and packed sequences; throws DataError
// with the reason when violated.
void validate_unit(const EncodedUnit& unit, size_t soft_tokens, bool requires_eos = true);
void validate_packed(const PackedSequence& seq, size_t soft_tokens);

// Packed dataset container: little-endian, magic + version framed.
void write_packed_dataset(std::ostream& out, std::span<const PackedSequence> seqs);
std::vector<PackedSequence> read_packed_dataset(std::istream& in);

} // namespace mmlm
