#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmlm/errors.hpp"

// Byte-level tokenizer: ids 0..255 are raw bytes, followed by the special
// ids below. Text round-trips losslessly because every byte maps to itself.

namespace mmlm::tok {

inline constexpr int32_t kByteCount = 256;
inline constexpr int32_t kBos = 256;        // <s>, sequence start
inline constexpr int32_t kEos = 257;        // </s>, sequence end
inline constexpr int32_t kImageStart = 258; // <image>
inline constexpr int32_t kImageEnd = 259;   // </image>
inline constexpr int32_t kPad = 260;        // <pad>, tail filler
inline constexpr int32_t kSlot = 261;       // placeholder id under soft tokens
inline constexpr int32_t kReserved = 262;   // unused, keeps vocab round
inline constexpr int32_t kVocabSize = 263;

inline bool is_special(int32_t id) { return id >= kByteCount && id < kVocabSize; }

inline bool is_valid(int32_t id) { return id >= 0 && id < kVocabSize; }

inline std::string id_name(int32_t id) {
    switch (id) {
        case kBos: return "<s>";
        case kEos: return "</s>";
        case kImageStart: return "<image>";
        case kImageEnd: return "</image>";
        case kPad: return "<pad>";
        case kSlot: return "<slot>";
        case kReserved: return "<reserved>";
        default: break;
    }
    if (id >= 0 && id < kByteCount) return std::string(1, static_cast<char>(id));
    throw DataError("token id " + std::to_string(id) + " outside vocabulary");
}

inline std::vector<int32_t> tokenize(std::string_view text) {
    std::vector<int32_t> ids;
    ids.reserve(text.size());
    for (unsigned char b : text) ids.push_back(static_cast<int32_t>(b));
    return ids;
}

// Inverse of tokenize. Special ids are not text and are rejected.
inline std::string detokenize(std::span<const int32_t> ids) {
    std::string out;
    out.reserve(ids.size());
    for (int32_t id : ids) {
        if (id < 0 || id >= kByteCount)
            throw DataError("cannot detokenize non-byte id " + std::to_string(id));
        out.push_back(static_cast<char>(id));
    }
    return out;
}

} // namespace mmlm::tok
