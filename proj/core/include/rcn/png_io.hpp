#pragma once

#include <string>

#include "rcn/image.hpp"

namespace rcn {

// Reads an 8- or 16-bit PNG (gray, gray+alpha, palette, RGB, RGBA) into a
// 1- or 3-channel image with intensities in [0,1]. Throws IoError.
Image read_png(const std::string& path);

// Writes 8-bit non-interlaced PNG; grayscale for 1 channel, RGB for 3.
void write_png(const std::string& path, const Image& img);

}  // namespace rcn
