#include "rcn/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "rcn/errors.hpp"

namespace rcn {

SampleGrid generate_grid(const TpsTransform& T, int out_h, int out_w) {
  if (out_h < 2 || out_w < 2) {
    throw InvalidArgumentError("output raster must be at least 2x2");
  }
  SampleGrid grid;
  grid.height = out_h;
  grid.width = out_w;
  grid.coords.resize(static_cast<std::size_t>(out_h) * out_w);
  for (int r = 0; r < out_h; ++r) {
    const double y = pixel_to_norm(r, out_h);
    for (int c = 0; c < out_w; ++c) {
      grid.at(r, c) = map_point(T, {pixel_to_norm(c, out_w), y});
    }
  }
  return grid;
}

namespace {

inline double fetch(const Image& img, int r, int c, int ch) {
  if (r < 0 || r >= img.height || c < 0 || c >= img.width) return 0.0;
  return img.at(r, c, ch);
}

// Coarse reject: any source point this far outside the frame has all four
// bilinear neighbors out of bounds, so it contributes exactly zero. Points in
// the one-pixel halo just outside still blend toward zero through fetch().
inline bool near_frame(Point2 p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::abs(p.x) <= 3.0 &&
         std::abs(p.y) <= 3.0;
}

}  // namespace

Image bilinear_sample(const Image& img, const SampleGrid& grid) {
  Image out(grid.height, grid.width, img.channels);
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const Point2 p = grid.at(r, c);
      if (!near_frame(p)) continue;  // zero padding
      const double fx = norm_to_pixel(p.x, img.width);
      const double fy = norm_to_pixel(p.y, img.height);
      const int x0 = static_cast<int>(std::floor(fx));
      const int y0 = static_cast<int>(std::floor(fy));
      const double ax = fx - x0;
      const double ay = fy - y0;
      for (int ch = 0; ch < img.channels; ++ch) {
        const double v00 = fetch(img, y0, x0, ch);
        const double v10 = fetch(img, y0, x0 + 1, ch);
        const double v01 = fetch(img, y0 + 1, x0, ch);
        const double v11 = fetch(img, y0 + 1, x0 + 1, ch);
        out.at(r, c, ch) = (1 - ay) * ((1 - ax) * v00 + ax * v10) +
                           ay * ((1 - ax) * v01 + ax * v11);
      }
    }
  }
  return out;
}

Image warp(const Image& img, const TpsTransform& T, int out_h, int out_w) {
  return bilinear_sample(img, generate_grid(T, out_h, out_w));
}

std::vector<double> loss_grad_wrt_fiducials(const Image& img,
                                            const FiducialSet& C,
                                            const FiducialSet& C_prime,
                                            int out_h, int out_w,
                                            const Image& loss_grad) {
  if (loss_grad.height != out_h || loss_grad.width != out_w ||
      loss_grad.channels != img.channels) {
    throw ShapeMismatchError("adjoint shape does not match the warp output");
  }
  const TpsTransform T = estimate_tps(C, C_prime);
  const int k = C.K();
  std::vector<double> grad(2 * static_cast<std::size_t>(k), 0.0);

  const double sx_scale = 0.5 * (img.width - 1);   // d(pixel x)/d(norm x)
  const double sy_scale = 0.5 * (img.height - 1);

  for (int r = 0; r < out_h; ++r) {
    const double y = pixel_to_norm(r, out_h);
    for (int c = 0; c < out_w; ++c) {
      const Point2 p_out{pixel_to_norm(c, out_w), y};
      const Point2 p = map_point(T, p_out);
      if (!near_frame(p)) continue;  // zero-padded region: no gradient
      const double fx = norm_to_pixel(p.x, img.width);
      const double fy = norm_to_pixel(p.y, img.height);
      const int x0 = static_cast<int>(std::floor(fx));
      const int y0 = static_cast<int>(std::floor(fy));
      const double ax = fx - x0;
      const double ay = fy - y0;

      double dldx = 0.0, dldy = 0.0;  // d(loss)/d(source coord), norm units
      for (int ch = 0; ch < img.channels; ++ch) {
        const double g = loss_grad.at(r, c, ch);
        if (g == 0.0) continue;
        const double v00 = fetch(img, y0, x0, ch);
        const double v10 = fetch(img, y0, x0 + 1, ch);
        const double v01 = fetch(img, y0 + 1, x0, ch);
        const double v11 = fetch(img, y0 + 1, x0 + 1, ch);
        const double dfx = (1 - ay) * (v10 - v00) + ay * (v11 - v01);
        const double dfy = (1 - ax) * (v01 - v00) + ax * (v11 - v10);
        dldx += g * dfx * sx_scale;
        dldy += g * dfy * sy_scale;
      }
      if (dldx == 0.0 && dldy == 0.0) continue;

      // The grid coordinate is linear in C': p = [C' 0] (Delta^-1 l(p_out)),
      // so d p / d c'_{j} is the j-th entry of u = Delta^-1 l(p_out).
      const Eigen::VectorXd u = T.delta_inv * lifted_basis(C, p_out);
      for (int j = 0; j < k; ++j) {
        grad[2 * j] += dldx * u(j);
        grad[2 * j + 1] += dldy * u(j);
      }
    }
  }
  return grad;
}

Image downsample_area(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw InvalidArgumentError("downsample target must be positive");
  }
  Image out(out_h, out_w, img.channels);
  const double ry = static_cast<double>(img.height) / out_h;
  const double rx = static_cast<double>(img.width) / out_w;
  for (int r = 0; r < out_h; ++r) {
    const double y0 = r * ry, y1 = (r + 1) * ry;
    const int iy0 = static_cast<int>(std::floor(y0));
    const int iy1 = std::min(img.height, static_cast<int>(std::ceil(y1)));
    for (int c = 0; c < out_w; ++c) {
      const double x0 = c * rx, x1 = (c + 1) * rx;
      const int ix0 = static_cast<int>(std::floor(x0));
      const int ix1 = std::min(img.width, static_cast<int>(std::ceil(x1)));
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0, area = 0.0;
        for (int yy = iy0; yy < iy1; ++yy) {
          const double wy = std::min<double>(yy + 1, y1) - std::max<double>(yy, y0);
          for (int xx = ix0; xx < ix1; ++xx) {
            const double wx = std::min<double>(xx + 1, x1) - std::max<double>(xx, x0);
            acc += wy * wx * img.at(yy, xx, ch);
            area += wy * wx;
          }
        }
        out.at(r, c, ch) = acc / area;
      }
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& v : kernel) v /= sum;

  const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
  Image tmp(img.height, img.width, img.channels);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * img.at(r, clampi(c + i, img.width), ch);
        }
        tmp.at(r, c, ch) = acc;
      }
    }
  }
  Image out(img.height, img.width, img.channels);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[i + radius] * tmp.at(clampi(r + i, img.height), c, ch);
        }
        out.at(r, c, ch) = acc;
      }
    }
  }
  return out;
}

}  // namespace rcn
