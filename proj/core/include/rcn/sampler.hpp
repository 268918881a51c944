#pragma once

#include <vector>

#include "rcn/geometry.hpp"
#include "rcn/image.hpp"

namespace rcn {

// Per-output-pixel source coordinates in the normalized frame.
struct SampleGrid {
  int height = 0;
  int width = 0;
  std::vector<Point2> coords;  // row-major

  Point2& at(int r, int c) { return coords[static_cast<std::size_t>(r) * width + c]; }
  Point2 at(int r, int c) const { return coords[static_cast<std::size_t>(r) * width + c]; }
};

// coords[r][c] = map_point(T, normalized(c, r)), corner-aligned.
SampleGrid generate_grid(const TpsTransform& T, int out_h, int out_w);

// Bilinear interpolation of the four neighboring source pixels; coordinates
// outside [-1,1]^2 produce exactly zero (zero padding).
Image bilinear_sample(const Image& img, const SampleGrid& grid);

Image warp(const Image& img, const TpsTransform& T, int out_h, int out_w);

// d(loss)/d(C') for loss with adjoint d(loss)/d(output) = loss_grad, where
// the output is warp(img, estimate_tps(C, C_prime), out_h, out_w).
// Returns a 2K vector interleaved as [x_0, y_0, x_1, y_1, ...].
std::vector<double> loss_grad_wrt_fiducials(const Image& img,
                                            const FiducialSet& C,
                                            const FiducialSet& C_prime,
                                            int out_h, int out_w,
                                            const Image& loss_grad);

// Area-averaged resize (exact fractional pixel coverage).
Image downsample_area(const Image& img, int out_h, int out_w);

// Separable Gaussian blur with clamp-to-edge borders.
Image gaussian_blur(const Image& img, double sigma);

}  // namespace rcn
