#include "mmlm/corpus.hpp"

#include <zlib.h>

#include <cctype>
#include <json.hpp>
#include <sstream>

#include "mmlm/base64.hpp"
#include "mmlm/bytes.hpp"
#include "mmlm/png_io.hpp"
#include "mmlm/rng.hpp"

namespace mmlm {

namespace {

constexpr uint32_t kArchiveMagic = 0x72616d6dU; // "mmar"
constexpr uint32_t kArchiveVersion = 1;
constexpr uint64_t kCoinTag = 0x636f696eULL; // "coin"

// Decodes one UTF-8 code point at p, advancing it; returns -1 on bad bytes.
int64_t next_codepoint(const char*& p, const char* end) {
    const auto byte = [&](int k) { return static_cast<uint8_t>(p[k]); };
    const uint8_t b0 = byte(0);
    if (b0 < 0x80) {
        p += 1;
        return b0;
    }
    int len = 0;
    int64_t cp = 0;
    if ((b0 & 0xe0) == 0xc0) {
        len = 2;
        cp = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
        len = 3;
        cp = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        p += 1;
        return -1;
    }
    if (end - p < len) {
        p = end;
        return -1;
    }
    for (int k = 1; k < len; ++k) {
        if ((byte(k) & 0xc0) != 0x80) {
            p += 1;
            return -1;
        }
        cp = (cp << 6) | (byte(k) & 0x3f);
    }
    p += len;
    return cp;
}

bool is_emoji(int64_t cp) {
    return (cp >= 0x1F000 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) || cp == 0xFE0F;
}

uint32_t payload_crc(const std::string& payload) {
    return static_cast<uint32_t>(
        crc32_z(crc32_z(0, nullptr, 0), reinterpret_cast<const Bytef*>(payload.data()), payload.size()));
}

} // namespace

const char* drop_reason_name(DropReason r) {
    switch (r) {
        case DropReason::kNone: return "none";
        case DropReason::kNotEnglish: return "not_english";
        case DropReason::kNoInterleavedImages: return "no_interleaved_images";
        case DropReason::kImagesGone: return "images_gone";
        case DropReason::kGibberish: return "gibberish";
        case DropReason::kSingleImageCoin: return "single_image_coin";
    }
    return "unknown";
}

bool is_gibberish_token(std::string_view token) {
    if (token.empty()) return false;
    if (token.find("://") != std::string_view::npos) return true;
    if (token.size() >= 2 && token.front() == '#') return true;
    const char* p = token.data();
    const char* end = token.data() + token.size();
    while (p < end) {
        const int64_t cp = next_codepoint(p, end);
        if (cp < 0 || is_emoji(cp)) return true;
    }
    return false;
}

double gibberish_fraction(const MultimodalDocument& doc) {
    size_t total = 0, flagged = 0;
    for (const auto& seg : doc.segments) {
        if (seg.kind != Segment::Kind::kText) continue;
        const std::string& text = seg.text;
        size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) i++;
            size_t j = i;
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) j++;
            if (j > i) {
                total++;
                if (is_gibberish_token(std::string_view(text).substr(i, j - i))) flagged++;
            }
            i = j;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(total);
}

bool is_single_colored(const ImageTensor& img, double variance_floor) {
    img.validate();
    const size_t pixels = img.height * img.width;
    double worst = 0;
    for (size_t c = 0; c < img.channels; ++c) {
        double sum = 0, sq = 0;
        for (size_t p = 0; p < pixels; ++p) {
            const double v = img.data[p * img.channels + c];
            sum += v;
            sq += v * v;
        }
        const double mean = sum / static_cast<double>(pixels);
        const double var = sq / static_cast<double>(pixels) - mean * mean;
        if (var > worst) worst = var;
    }
    return worst < variance_floor;
}

FilterDecision evaluate_document(const RawDocument& raw, const FilterConfig& cfg, uint64_t seed,
                                 uint64_t doc_index) {
    FilterDecision d;
    auto drop = [&](DropReason r) {
        d.keep = false;
        d.reason = r;
        return d;
    };

    if (raw.language != "en") return drop(DropReason::kNotEnglish);

    bool has_text = false;
    size_t image_total = 0;
    for (const auto& seg : raw.content.segments) {
        if (seg.kind == Segment::Kind::kText && !seg.text.empty()) has_text = true;
        if (seg.kind == Segment::Kind::kImage) image_total++;
    }
    if (!has_text || image_total == 0) return drop(DropReason::kNoInterleavedImages);

    size_t ordinal = 0, survivors = 0;
    for (const auto& seg : raw.content.segments) {
        if (seg.kind != Segment::Kind::kImage) continue;
        if (seg.image.height < cfg.min_image_side || seg.image.width < cfg.min_image_side)
            d.small_images.push_back(ordinal);
        else if (is_single_colored(seg.image, cfg.flat_variance))
            d.flat_images.push_back(ordinal);
        else if (++survivors > cfg.max_images)
            d.capped_images.push_back(ordinal);
        ordinal++;
    }
    if (survivors == 0) return drop(DropReason::kImagesGone);

    if (gibberish_fraction(raw.content) >= cfg.gibberish_fraction) return drop(DropReason::kGibberish);

    const size_t remaining = survivors > cfg.max_images ? cfg.max_images : survivors;
    if (remaining == 1) {
        Rng coin(derive_seed(seed, kCoinTag, doc_index));
        if (coin.next_double() < cfg.single_image_drop) return drop(DropReason::kSingleImageCoin);
    }
    return d;
}

MultimodalDocument apply_decision(const RawDocument& raw, const FilterDecision& d) {
    if (!d.keep) throw DataError("cannot materialize a dropped document");
    std::vector<uint8_t> dropped;
    auto mark = [&](const std::vector<size_t>& v) {
        for (size_t i : v) {
            if (i >= dropped.size()) dropped.resize(i + 1, 0);
            dropped[i] = 1;
        }
    };
    mark(d.small_images);
    mark(d.flat_images);
    mark(d.capped_images);

    MultimodalDocument out;
    out.doc_id = raw.doc_id;
    size_t ordinal = 0;
    for (const auto& seg : raw.content.segments) {
        if (seg.kind == Segment::Kind::kImage) {
            const bool skip = ordinal < dropped.size() && dropped[ordinal];
            ordinal++;
            if (skip) continue;
        }
        out.segments.push_back(seg);
    }
    return out;
}

std::string PipelineStats::to_json() const {
    nlohmann::ordered_json j;
    j["input_docs"] = input_docs;
    j["kept_docs"] = kept_docs;
    j["dropped"] = {{"not_english", dropped_not_english},
                    {"no_interleaved_images", dropped_no_interleaved},
                    {"images_gone", dropped_images_gone},
                    {"gibberish", dropped_gibberish},
                    {"single_image_coin", dropped_single_image}};
    j["images"] = {{"dropped_small", images_dropped_small},
                   {"dropped_single_colored", images_dropped_flat},
                   {"capped", images_capped}};
    return j.dump(2);
}

std::vector<MultimodalDocument> run_pipeline(const std::vector<RawDocument>& docs,
                                             const FilterConfig& cfg, uint64_t seed,
                                             PipelineStats* stats) {
    PipelineStats local;
    std::vector<MultimodalDocument> kept;
    for (size_t i = 0; i < docs.size(); ++i) {
        local.input_docs++;
        auto d = evaluate_document(docs[i], cfg, seed, i);
        local.images_dropped_small += d.small_images.size();
        local.images_dropped_flat += d.flat_images.size();
        local.images_capped += d.capped_images.size();
        if (!d.keep) {
            switch (d.reason) {
                case DropReason::kNotEnglish: local.dropped_not_english++; break;
                case DropReason::kNoInterleavedImages: local.dropped_no_interleaved++; break;
                case DropReason::kImagesGone: local.dropped_images_gone++; break;
                case DropReason::kGibberish: local.dropped_gibberish++; break;
                case DropReason::kSingleImageCoin: local.dropped_single_image++; break;
                case DropReason::kNone: break;
            }
            continue;
        }
        kept.push_back(apply_decision(docs[i], d));
        local.kept_docs++;
    }
    if (stats) *stats = local;
    return kept;
}

void write_doc_archive(std::ostream& out, const std::vector<MultimodalDocument>& docs) {
    std::string head;
    bytes::put_u32(head, kArchiveMagic);
    bytes::put_u32(head, kArchiveVersion);
    bytes::put_u64(head, docs.size());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));

    for (const auto& doc : docs) {
        std::string payload;
        bytes::put_u64(payload, doc.doc_id.size());
        payload.append(doc.doc_id);
        bytes::put_u64(payload, doc.segments.size());
        for (const auto& seg : doc.segments) {
            if (seg.kind == Segment::Kind::kText) {
                payload.push_back(0);
                bytes::put_u64(payload, seg.text.size());
                payload.append(seg.text);
            } else {
                seg.image.validate();
                payload.push_back(1);
                bytes::put_u64(payload, seg.image.height);
                bytes::put_u64(payload, seg.image.width);
                bytes::put_u64(payload, seg.image.channels);
                for (float v : seg.image.data) bytes::put_f32(payload, v);
            }
        }
        std::string rec;
        bytes::put_u64(rec, payload.size());
        bytes::put_u32(rec, payload_crc(payload));
        out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    if (!out) throw DataError("failed writing document archive");
}

std::vector<MultimodalDocument> read_doc_archive(std::istream& in) {
    bytes::Reader r(in, "document archive");
    if (r.u32() != kArchiveMagic) throw DataError("not a document archive");
    if (r.u32() != kArchiveVersion) throw DataError("unsupported document archive version");
    const uint64_t count = r.u64();
    if (count > (1ull << 32)) throw DataError("implausible document archive record count");

    std::vector<MultimodalDocument> docs;
    docs.reserve(count);
    for (uint64_t n = 0; n < count; ++n) {
        const uint64_t len = r.u64();
        if (len > (1ull << 33)) throw DataError("implausible document archive record size");
        const uint32_t crc = r.u32();
        auto payload_bytes = r.blob(len);
        const std::string payload(payload_bytes.begin(), payload_bytes.end());
        if (payload_crc(payload) != crc)
            throw DataError("archive record " + std::to_string(n) + " fails its checksum");

        std::istringstream ps(payload);
        bytes::Reader pr(ps, "document archive record");
        MultimodalDocument doc;
        const uint64_t id_len = pr.u64();
        auto id = pr.blob(id_len);
        doc.doc_id.assign(id.begin(), id.end());
        const uint64_t segs = pr.u64();
        if (segs > (1ull << 24)) throw DataError("implausible segment count");
        for (uint64_t s = 0; s < segs; ++s) {
            uint8_t kind = 0;
            pr.read(&kind, 1);
            if (kind == 0) {
                const uint64_t tl = pr.u64();
                auto t = pr.blob(tl);
                doc.segments.push_back(Segment::of_text(std::string(t.begin(), t.end())));
            } else if (kind == 1) {
                ImageTensor img;
                img.height = pr.u64();
                img.width = pr.u64();
                img.channels = pr.u64();
                if (img.height > (1u << 20) || img.width > (1u << 20) || img.channels != 3)
                    throw DataError("implausible image dimensions in archive");
                img.data.resize(img.height * img.width * img.channels);
                for (auto& v : img.data) v = pr.f32();
                doc.segments.push_back(Segment::of_image(std::move(img)));
            } else {
                throw DataError("unknown segment kind in archive");
            }
        }
        if (!pr.at_eof()) throw DataError("trailing bytes in archive record " + std::to_string(n));
        docs.push_back(std::move(doc));
    }
    if (!r.at_eof()) throw DataError("trailing bytes after the last archive record");
    return docs;
}

std::vector<RawDocument> read_jsonl_corpus(std::istream& in) {
    std::vector<RawDocument> docs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
                throw DataError("document needs a string id");
            RawDocument doc;
            doc.doc_id = j["id"].get<std::string>();
            if (j.contains("language")) doc.language = j["language"].get<std::string>();
            if (!j.contains("segments") || !j["segments"].is_array())
                throw DataError("document needs a segments array");
            for (const auto& seg : j["segments"]) {
                if (seg.contains("text")) {
                    doc.content.add_text(seg["text"].get<std::string>());
                } else if (seg.contains("image_png_b64")) {
                    auto png = base64::decode(seg["image_png_b64"].get<std::string>());
                    doc.content.add_image(decode_png(png));
                } else {
                    throw DataError("segment needs text or image_png_b64");
                }
            }
            docs.push_back(std::move(doc));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return docs;
}

std::vector<InstructionRow> read_instruction_jsonl(std::istream& in) {
    std::vector<InstructionRow> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            if (!j.is_object() || !j.contains("instruction") || !j["instruction"].is_string())
                throw DataError("row needs a string instruction");
            if (!j.contains("output") || !j["output"].is_string())
                throw DataError("row needs a string output");
            InstructionRow row;
            row.instruction = j["instruction"].get<std::string>();
            if (j.contains("input")) row.input = j["input"].get<std::string>();
            row.output = j["output"].get<std::string>();
            rows.push_back(std::move(row));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

void write_instruction_jsonl(std::ostream& out, const std::vector<InstructionRow>& rows) {
    for (const auto& row : rows) {
        nlohmann::ordered_json j;
        j["instruction"] = row.instruction;
        j["input"] = row.input;
        j["output"] = row.output;
        out << j.dump() << "\n";
    }
    if (!out) throw DataError("failed writing instruction rows");
}

void write_jsonl_corpus(std::ostream& out, const std::vector<RawDocument>& docs) {
    for (const auto& doc : docs) {
        nlohmann::ordered_json j;
        j["id"] = doc.doc_id;
        j["language"] = doc.language;
        j["segments"] = nlohmann::ordered_json::array();
        for (const auto& seg : doc.content.segments) {
            if (seg.kind == Segment::Kind::kText)
                j["segments"].push_back({{"text", seg.text}});
            else
                j["segments"].push_back({{"image_png_b64", base64::encode(encode_png(seg.image))}});
        }
        out << j.dump() << "\n";
    }
    if (!out) throw DataError("failed writing corpus");
}

} // namespace mmlm
