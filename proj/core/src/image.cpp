#include "rcn/image.hpp"

#include <cmath>
#include <string>

#include "rcn/errors.hpp"

namespace rcn {

void Image::validate() const {
  if (height < 2 || width < 2) {
    throw InvalidArgumentError("image dimensions must be at least 2x2, got " +
                               std::to_string(height) + "x" +
                               std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw InvalidArgumentError("channel count must be 1 or 3, got " +
                               std::to_string(channels));
  }
  if (data.size() != static_cast<std::size_t>(height) * width * channels) {
    throw InvalidArgumentError("image buffer size mismatch");
  }
  for (double v : data) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw InvalidArgumentError("image intensity outside [0,1]");
    }
  }
}

Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.height, img.width, 1);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      out.at(r, c) = (img.at(r, c, 0) + img.at(r, c, 1) + img.at(r, c, 2)) / 3.0;
    }
  }
  return out;
}

}  // namespace rcn
