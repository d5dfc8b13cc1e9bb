#pragma once

#include <string>
#include <string_view>

#include "mmlm/stream.hpp"

namespace mmlm {

// RGB8 PNG bytes from a float image; values are clamped to [0, 1] and
// rounded to the nearest byte.
std::string encode_png(const ImageTensor& img);

// Float RGB image from PNG bytes. Grayscale, palette and alpha inputs are
// converted to plain RGB.
ImageTensor decode_png(std::string_view bytes);

ImageTensor read_png_file(const std::string& path);
void write_png_file(const std::string& path, const ImageTensor& img);

} // namespace mmlm
