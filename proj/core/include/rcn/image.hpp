#pragma once

#include <cstddef>
#include <vector>

namespace rcn {

// H x W x C raster with intensities in [0,1], row-major by (row, col, channel).
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c = 1, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int r, int c, int ch = 0) {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
  double at(int r, int c, int ch = 0) const {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }

  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  // Throws InvalidArgumentError on non-finite or out-of-range intensities,
  // or dimensions below 2x2.
  void validate() const;
};

// Luma average for 3-channel input; returns a copy for 1-channel input.
Image to_gray(const Image& img);

// Pixel index <-> normalized coordinate, corner-aligned: pixel 0 maps to -1
// and pixel n-1 to +1.
inline double pixel_to_norm(int index, int extent) {
  return -1.0 + 2.0 * index / (extent - 1);
}
inline double norm_to_pixel(double coord, int extent) {
  return (coord + 1.0) * 0.5 * (extent - 1);
}

}  // namespace rcn
