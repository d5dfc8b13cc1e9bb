#include "mmlm/stream.hpp"

#include <algorithm>
#include <cmath>

#include "mmlm/bytes.hpp"

namespace mmlm {

ImageTensor ImageTensor::filled(size_t h, size_t w, float r, float g, float b) {
    ImageTensor img;
    img.height = h;
    img.width = w;
    img.channels = 3;
    img.data.resize(h * w * 3);
    for (size_t i = 0; i < h * w; ++i) {
        img.data[i * 3 + 0] = r;
        img.data[i * 3 + 1] = g;
        img.data[i * 3 + 2] = b;
    }
    return img;
}

void ImageTensor::validate() const {
    if (height == 0 || width == 0) throw DataError("image with zero extent");
    if (channels != 3) throw DataError("images must have 3 channels");
    if (data.size() != height * width * channels)
        throw DataError("image buffer size disagrees with its dimensions");
}

ImageTensor resize_bilinear(const ImageTensor& img, size_t out_h, size_t out_w) {
    img.validate();
    if (out_h == 0 || out_w == 0) throw DataError("resize to zero extent");
    if (out_h == img.height && out_w == img.width) return img;
    ImageTensor out;
    out.height = out_h;
    out.width = out_w;
    out.channels = img.channels;
    out.data.resize(out_h * out_w * img.channels);
    const float sy = static_cast<float>(img.height) / static_cast<float>(out_h);
    const float sx = static_cast<float>(img.width) / static_cast<float>(out_w);
    for (size_t y = 0; y < out_h; ++y) {
        // sample at pixel centers
        float fy = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
        fy = std::max(0.0f, std::min(fy, static_cast<float>(img.height - 1)));
        const size_t y0 = static_cast<size_t>(fy);
        const size_t y1 = std::min(y0 + 1, img.height - 1);
        const float wy = fy - static_cast<float>(y0);
        for (size_t x = 0; x < out_w; ++x) {
            float fx = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
            fx = std::max(0.0f, std::min(fx, static_cast<float>(img.width - 1)));
            const size_t x0 = static_cast<size_t>(fx);
            const size_t x1 = std::min(x0 + 1, img.width - 1);
            const float wx = fx - static_cast<float>(x0);
            for (size_t c = 0; c < img.channels; ++c) {
                const float top = img.at(y0, x0, c) * (1.0f - wx) + img.at(y0, x1, c) * wx;
                const float bot = img.at(y1, x0, c) * (1.0f - wx) + img.at(y1, x1, c) * wx;
                out.at(y, x, c) = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return out;
}

size_t MultimodalDocument::image_count() const {
    size_t n = 0;
    for (const auto& s : segments)
        if (s.kind == Segment::Kind::kImage) ++n;
    return n;
}

size_t MultimodalDocument::text_bytes() const {
    size_t n = 0;
    for (const auto& s : segments)
        if (s.kind == Segment::Kind::kText) n += s.text.size();
    return n;
}

namespace {

void append_image_block(EncodedUnit& unit, const ImageTensor& img, size_t soft_tokens, bool guards_in_loss) {
    img.validate();
    unit.ids.push_back(tok::kImageStart);
    unit.target_mask.push_back(guards_in_loss ? 1 : 0);
    ImageSlot slot;
    slot.start = unit.ids.size();
    slot.length = soft_tokens;
    slot.image_index = unit.images.size();
    for (size_t i = 0; i < soft_tokens; ++i) {
        unit.ids.push_back(tok::kSlot);
        unit.target_mask.push_back(0);
    }
    unit.ids.push_back(tok::kImageEnd);
    unit.target_mask.push_back(guards_in_loss ? 1 : 0);
    unit.slots.push_back(slot);
    unit.images.push_back(img);
}

EncodedUnit encode_segments(const MultimodalDocument& doc, size_t soft_tokens, EncodeOptions opts,
                            bool close_with_eos, bool targets) {
    if (doc.segments.empty()) throw DataError("cannot encode a document with no segments");
    if (soft_tokens == 0) throw DataError("soft token count must be positive");
    EncodedUnit unit;
    unit.doc_id = doc.doc_id;
    unit.ids.push_back(tok::kBos);
    unit.target_mask.push_back(0);
    for (const auto& seg : doc.segments) {
        if (seg.kind == Segment::Kind::kText) {
            for (unsigned char b : seg.text) {
                unit.ids.push_back(static_cast<int32_t>(b));
                unit.target_mask.push_back(targets ? 1 : 0);
            }
        } else {
            append_image_block(unit, seg.image, soft_tokens, targets && opts.guards_in_loss);
        }
    }
    if (close_with_eos) {
        unit.ids.push_back(tok::kEos);
        unit.target_mask.push_back(targets && opts.eos_in_loss ? 1 : 0);
    }
    if (!targets)
        for (auto& m : unit.target_mask) m = 0;
    return unit;
}

} // namespace

EncodedUnit encode_document(const MultimodalDocument& doc, size_t soft_tokens, EncodeOptions opts) {
    return encode_segments(doc, soft_tokens, opts, /*close_with_eos=*/true, /*targets=*/true);
}

EncodedUnit encode_prompt(const MultimodalDocument& doc, size_t soft_tokens) {
    return encode_segments(doc, soft_tokens, {}, /*close_with_eos=*/false, /*targets=*/false);
}

namespace {

// Atomic piece of a unit: one discrete token, or a whole image block.
struct Atom {
    size_t begin = 0, end = 0; // id range in the source unit
    int64_t image = -1;        // source image index when this is a block
};

std::vector<Atom> atomize(const EncodedUnit& unit) {
    std::vector<Atom> atoms;
    size_t t = 0;
    size_t slot_i = 0;
    const size_t n = unit.ids.size();
    while (t < n) {
        if (slot_i < unit.slots.size() && t + 1 == unit.slots[slot_i].start) {
            // guard + soft run + guard
            const auto& s = unit.slots[slot_i];
            atoms.push_back({t, s.start + s.length + 1, static_cast<int64_t>(s.image_index)});
            t = s.start + s.length + 1;
            ++slot_i;
        } else {
            atoms.push_back({t, t + 1, -1});
            ++t;
        }
    }
    return atoms;
}

} // namespace

std::vector<EncodedUnit> split_to_fit(const EncodedUnit& unit, size_t max_len, EncodeOptions opts) {
    if (unit.ids.size() <= max_len) return {unit};
    if (max_len < 3) throw DataError("max length too small to hold any unit");

    // Strip the outer <s>/</s>; pieces are re-opened and re-closed.
    if (unit.ids.empty() || unit.ids.front() != tok::kBos || unit.ids.back() != tok::kEos)
        throw DataError("cannot split a unit that is not <s>...</s> framed (document " + unit.doc_id + ")");
    std::vector<Atom> atoms = atomize(unit);
    atoms.erase(atoms.begin());
    atoms.pop_back();

    std::vector<EncodedUnit> pieces;
    EncodedUnit cur;
    auto open_piece = [&]() {
        cur = EncodedUnit{};
        cur.doc_id = unit.doc_id;
        cur.ids.push_back(tok::kBos);
        cur.target_mask.push_back(0);
    };
    auto close_piece = [&]() {
        cur.ids.push_back(tok::kEos);
        cur.target_mask.push_back(opts.eos_in_loss ? 1 : 0);
        pieces.push_back(std::move(cur));
    };
    open_piece();
    for (const auto& a : atoms) {
        const size_t atom_len = a.end - a.begin;
        if (atom_len + 2 > max_len)
            throw DataError("image block longer than the maximum sequence length in document " + unit.doc_id);
        if (cur.ids.size() + atom_len + 1 > max_len) { // +1 for the closing </s>
            close_piece();
            open_piece();
        }
        if (a.image >= 0) {
            ImageSlot slot;
            slot.start = cur.ids.size() + 1;
            slot.length = unit.slots[0].length;
            slot.image_index = cur.images.size();
            cur.ids.push_back(tok::kImageStart);
            cur.target_mask.push_back(unit.target_mask[a.begin]);
            for (size_t i = 0; i < slot.length; ++i) {
                cur.ids.push_back(tok::kSlot);
                cur.target_mask.push_back(0);
            }
            cur.ids.push_back(tok::kImageEnd);
            cur.target_mask.push_back(unit.target_mask[a.end - 1]);
            cur.slots.push_back(slot);
            cur.images.push_back(unit.images[static_cast<size_t>(a.image)]);
        } else {
            cur.ids.push_back(unit.ids[a.begin]);
            cur.target_mask.push_back(unit.target_mask[a.begin]);
        }
    }
    close_piece();
    return pieces;
}

std::vector<PackedSequence> pack_full_sentences(const std::vector<EncodedUnit>& units, size_t seq_len) {
    if (seq_len == 0) throw DataError("sequence length must be positive");
    std::vector<PackedSequence> out;
    PackedSequence cur;
    auto flush = [&]() {
        if (cur.ids.empty()) return;
        cur.pad_count = seq_len - cur.ids.size();
        while (cur.ids.size() < seq_len) {
            cur.ids.push_back(tok::kPad);
            cur.target_mask.push_back(0);
        }
        out.push_back(std::move(cur));
        cur = PackedSequence{};
    };
    for (const auto& u : units) {
        if (u.ids.size() > seq_len)
            throw DataError("unit longer than the packing length (document " + u.doc_id + ")");
        if (cur.ids.size() + u.ids.size() > seq_len) flush();
        const size_t offset = cur.ids.size();
        const size_t image_base = cur.images.size();
        cur.ids.insert(cur.ids.end(), u.ids.begin(), u.ids.end());
        cur.target_mask.insert(cur.target_mask.end(), u.target_mask.begin(), u.target_mask.end());
        for (const auto& s : u.slots)
            cur.slots.push_back({s.start + offset, s.length, s.image_index + image_base});
        cur.images.insert(cur.images.end(), u.images.begin(), u.images.end());
    }
    flush();
    return out;
}

EncodedUnit build_instruction_unit(const std::string& instruction, const std::string& input,
                                   const std::string& output, EncodeOptions opts) {
    if (instruction.empty()) throw DataError("instruction text is empty");
    if (output.empty()) throw DataError("instruction output is empty");
    EncodedUnit unit;
    unit.ids.push_back(tok::kBos);
    unit.target_mask.push_back(0);
    std::string prompt = instruction;
    if (!input.empty()) {
        prompt += '\n';
        prompt += input;
    }
    prompt += '\n';
    for (unsigned char b : prompt) {
        unit.ids.push_back(static_cast<int32_t>(b));
        unit.target_mask.push_back(0); // instruction and input are context only
    }
    for (unsigned char b : output) {
        unit.ids.push_back(static_cast<int32_t>(b));
        unit.target_mask.push_back(1);
    }
    unit.ids.push_back(tok::kEos);
    unit.target_mask.push_back(opts.eos_in_loss ? 1 : 0);
    return unit;
}

namespace {

void validate_ids_slots(const std::vector<int32_t>& ids, const std::vector<ImageSlot>& slots,
                        const std::vector<ImageTensor>& images, const std::vector<uint8_t>& mask,
                        size_t soft_tokens) {
    if (ids.size() != mask.size()) throw DataError("target mask must align with ids");
    for (int32_t id : ids)
        if (!tok::is_valid(id)) throw DataError("invalid token id " + std::to_string(id));
    std::vector<uint8_t> in_slot(ids.size(), 0);
    for (const auto& s : slots) {
        if (s.length != soft_tokens) throw DataError("slot length differs from the soft token count");
        if (s.start == 0 || s.start + s.length >= ids.size()) throw DataError("slot range out of bounds");
        if (ids[s.start - 1] != tok::kImageStart || ids[s.start + s.length] != tok::kImageEnd)
            throw DataError("slot is not guarded by image tokens");
        if (s.image_index >= images.size()) throw DataError("slot refers to a missing image");
        for (size_t t = s.start; t < s.start + s.length; ++t) {
            if (ids[t] != tok::kSlot) throw DataError("slot interior holds a non-placeholder id");
            if (mask[t]) throw DataError("slot interior position marked as a target");
            in_slot[t] = 1;
        }
    }
    for (size_t t = 0; t < ids.size(); ++t) {
        if (ids[t] == tok::kSlot && !in_slot[t]) throw DataError("placeholder id outside any slot");
        if (ids[t] == tok::kPad && mask[t]) throw DataError("padding position marked as a target");
    }
    if (!mask.empty() && mask[0]) throw DataError("the opening position cannot be a target");
}

} // namespace

void validate_unit(const EncodedUnit& unit, size_t soft_tokens, bool requires_eos) {
    if (unit.ids.empty() || unit.ids.front() != tok::kBos) throw DataError("unit must start with <s>");
    if (requires_eos && unit.ids.back() != tok::kEos) throw DataError("unit must end with </s>");
    if (unit.slots.size() != unit.images.size()) throw DataError("slot and image counts disagree");
    validate_ids_slots(unit.ids, unit.slots, unit.images, unit.target_mask, soft_tokens);
}

void validate_packed(const PackedSequence& seq, size_t soft_tokens) {
    if (seq.ids.empty()) throw DataError("empty packed sequence");
    if (seq.pad_count > seq.ids.size()) throw DataError("pad count exceeds sequence length");
    for (size_t t = seq.ids.size() - seq.pad_count; t < seq.ids.size(); ++t)
        if (seq.ids[t] != tok::kPad) throw DataError("pad tail holds a non-pad id");
    validate_ids_slots(seq.ids, seq.slots, seq.images, seq.target_mask, soft_tokens);
}

namespace {

constexpr uint32_t kPackedMagic = 0x6b706d6dU; // "mmpk"
constexpr uint32_t kPackedVersion = 1;

void write_image(std::string& buf, const ImageTensor& img) {
    bytes::put_u64(buf, img.height);
    bytes::put_u64(buf, img.width);
    bytes::put_u64(buf, img.channels);
    for (float v : img.data) bytes::put_f32(buf, v);
}

ImageTensor read_image(bytes::Reader& r) {
    ImageTensor img;
    img.height = static_cast<size_t>(r.u64());
    img.width = static_cast<size_t>(r.u64());
    img.channels = static_cast<size_t>(r.u64());
    if (img.height > (1u << 20) || img.width > (1u << 20) || img.channels != 3)
        throw DataError("implausible image header in packed dataset");
    img.data.resize(img.height * img.width * img.channels);
    for (auto& v : img.data) v = r.f32();
    return img;
}

} // namespace

void write_packed_dataset(std::ostream& out, std::span<const PackedSequence> seqs) {
    std::string buf;
    bytes::put_u32(buf, kPackedMagic);
    bytes::put_u32(buf, kPackedVersion);
    bytes::put_u64(buf, seqs.size());
    for (const auto& s : seqs) {
        bytes::put_u64(buf, s.ids.size());
        bytes::put_u64(buf, s.pad_count);
        for (int32_t id : s.ids) bytes::put_u32(buf, static_cast<uint32_t>(id));
        for (uint8_t m : s.target_mask) buf.push_back(static_cast<char>(m));
        bytes::put_u64(buf, s.slots.size());
        for (const auto& sl : s.slots) {
            bytes::put_u64(buf, sl.start);
            bytes::put_u64(buf, sl.length);
            bytes::put_u64(buf, sl.image_index);
        }
        bytes::put_u64(buf, s.images.size());
        for (const auto& img : s.images) write_image(buf, img);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("packed dataset write failed");
}

std::vector<PackedSequence> read_packed_dataset(std::istream& in) {
    bytes::Reader r(in, "packed dataset");
    if (r.u32() != kPackedMagic) throw DataError("not a packed dataset file");
    const uint32_t version = r.u32();
    if (version != kPackedVersion)
        throw DataError("unknown packed dataset version " + std::to_string(version));
    const uint64_t count = r.u64();
    std::vector<PackedSequence> seqs;
    seqs.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        PackedSequence s;
        const uint64_t len = r.u64();
        s.pad_count = static_cast<size_t>(r.u64());
        if (len > (1u << 24)) throw DataError("implausible sequence length in packed dataset");
        s.ids.resize(len);
        for (auto& id : s.ids) id = static_cast<int32_t>(r.u32());
        s.target_mask.resize(len);
        for (auto& m : s.target_mask) {
            uint8_t b;
            r.read(&b, 1);
            m = b;
        }
        const uint64_t n_slots = r.u64();
        for (uint64_t k = 0; k < n_slots; ++k) {
            ImageSlot sl;
            sl.start = static_cast<size_t>(r.u64());
            sl.length = static_cast<size_t>(r.u64());
            sl.image_index = static_cast<size_t>(r.u64());
            s.slots.push_back(sl);
        }
        const uint64_t n_images = r.u64();
        for (uint64_t k = 0; k < n_images; ++k) s.images.push_back(read_image(r));
        seqs.push_back(std::move(s));
    }
    return seqs;
}

} // namespace mmlm
