#include "mmlm/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "mmlm/errors.hpp"

namespace mmlm {

std::string encode_png(const ImageTensor& img) {
    img.validate();
    std::vector<png_byte> pixels(img.height * img.width * 3);
    for (size_t i = 0; i < pixels.size(); ++i) {
        float v = img.data[i];
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        pixels[i] = static_cast<png_byte>(std::lround(v * 255.0f));
    }

    png_image out;
    std::memset(&out, 0, sizeof(out));
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(img.width);
    out.height = static_cast<png_uint_32>(img.height);
    out.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&out, nullptr, &size, 0, pixels.data(), 0, nullptr))
        throw DataError(std::string("png encode failed: ") + out.message);
    std::string buf(size, '\0');
    if (!png_image_write_to_memory(&out, buf.data(), &size, 0, pixels.data(), 0, nullptr))
        throw DataError(std::string("png encode failed: ") + out.message);
    buf.resize(size);
    return buf;
}

ImageTensor decode_png(std::string_view bytes) {
    png_image in;
    std::memset(&in, 0, sizeof(in));
    in.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&in, bytes.data(), bytes.size()))
        throw DataError(std::string("png decode failed: ") + in.message);
    in.format = PNG_FORMAT_RGB;
    std::vector<png_byte> pixels(PNG_IMAGE_SIZE(in));
    if (!png_image_finish_read(&in, nullptr, pixels.data(), 0, nullptr)) {
        png_image_free(&in);
        throw DataError(std::string("png decode failed: ") + in.message);
    }

    ImageTensor img;
    img.height = in.height;
    img.width = in.width;
    img.data.resize(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i)
        img.data[i] = static_cast<float>(pixels[i]) / 255.0f;
    img.validate();
    return img;
}

ImageTensor read_png_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_png(ss.str());
}

void write_png_file(const std::string& path, const ImageTensor& img) {
    auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) throw DataError("failed writing " + path);
}

} // namespace mmlm
