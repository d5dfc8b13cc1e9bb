#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mmlm/errors.hpp"

// Little-endian byte packing helpers shared by every on-disk format in the
// project. All formats are explicitly little-endian regardless of host order.

namespace mmlm::bytes {

inline void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64(std::string& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v & 0xffffffffULL));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

inline void put_f32(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline void put_f64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline uint64_t get_u64(const uint8_t* p) {
    return static_cast<uint64_t>(get_u32(p)) | (static_cast<uint64_t>(get_u32(p + 4)) << 32);
}

inline float get_f32(const uint8_t* p) {
    uint32_t bits = get_u32(p);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline double get_f64(const uint8_t* p) {
    uint64_t bits = get_u64(p);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

// Stream reader that throws DataError on short reads instead of leaving the
// caller with a silently truncated value.
class Reader {
  public:
    explicit Reader(std::istream& in, std::string what = "stream") : in_(in), what_(std::move(what)) {}

    void read(void* dst, size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in_.gcount()) != n)
            throw DataError("truncated " + what_);
    }

    uint32_t u32() {
        uint8_t b[4];
        read(b, 4);
        return get_u32(b);
    }

    uint64_t u64() {
        uint8_t b[8];
        read(b, 8);
        return get_u64(b);
    }

    float f32() {
        uint8_t b[4];
        read(b, 4);
        return get_f32(b);
    }

    double f64() {
        uint8_t b[8];
        read(b, 8);
        return get_f64(b);
    }

    std::vector<uint8_t> blob(size_t n) {
        std::vector<uint8_t> out(n);
        if (n) read(out.data(), n);
        return out;
    }

    bool at_eof() {
        return in_.peek() == std::char_traits<char>::eof();
    }

  private:
    std::istream& in_;
    std::string what_;
};

} // namespace mmlm::bytes
