#pragma once

#include <cmath>
#include <vector>

#include "rcn/geometry.hpp"
#include "rcn/image.hpp"
#include "rcn/rng.hpp"
#include "rcn/sampler.hpp"

namespace rcn::testutil {

// Base grid perturbed by uniform noise; regenerates until the perturbation
// keeps the set valid (pairwise-distinct).
inline FiducialSet perturbed_fiducials(int K, double amplitude, CounterRng& rng,
                                       double margin = 0.0) {
  const FiducialSet base = base_fiducials(K, margin);
  for (;;) {
    FiducialSet out = base;
    for (Point2& p : out.points) {
      p.x += rng.uniform(-amplitude, amplitude);
      p.y += rng.uniform(-amplitude, amplitude);
    }
    if (out.is_valid()) return out;
  }
}

inline Image smooth_random_image(int h, int w, CounterRng& rng,
                                 double sigma = 2.0) {
  Image img(h, w, 1);
  for (double& v : img.data) v = rng.next_unit();
  return gaussian_blur(img, sigma);
}

// Adjoint supported only on output pixels whose source coordinate falls well
// inside a bilinear cell and away from the frame border. A finite-difference
// step then never crosses an interpolation breakpoint, where the warp is only
// one-sided differentiable, so central differences are exact up to roundoff.
inline Image interior_cell_adjoint(const Image& img, const FiducialSet& C,
                                   const FiducialSet& C_prime, int out_h,
                                   int out_w, double margin = 0.25) {
  const SampleGrid grid = generate_grid(estimate_tps(C, C_prime), out_h, out_w);
  Image adjoint(out_h, out_w, img.channels, 0.0);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const Point2 p = grid.at(r, c);
      const double fx = norm_to_pixel(p.x, img.width);
      const double fy = norm_to_pixel(p.y, img.height);
      if (fx < 1.0 || fx > img.width - 2.0 || fy < 1.0 ||
          fy > img.height - 2.0) {
        continue;
      }
      const double ax = fx - std::floor(fx);
      const double ay = fy - std::floor(fy);
      if (ax < margin || ax > 1.0 - margin || ay < margin ||
          ay > 1.0 - margin) {
        continue;
      }
      for (int ch = 0; ch < img.channels; ++ch) adjoint.at(r, c, ch) = 1.0;
    }
  }
  return adjoint;
}

// Independent finite-difference oracle for the fiducial gradient: evaluates
// the scalar loss sum(adjoint .* warp(img, T(C'))) through the plain warp
// path and central-differences each coordinate.
inline std::vector<double> fd_loss_grad(const Image& img, const FiducialSet& C,
                                        const FiducialSet& C_prime, int out_h,
                                        int out_w, const Image& adjoint,
                                        double h = 1e-3) {
  const auto loss = [&](const FiducialSet& cp) {
    const Image out = warp(img, estimate_tps(C, cp), out_h, out_w);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      acc += adjoint.data[i] * out.data[i];
    }
    return acc;
  };
  const int k = C.K();
  std::vector<double> grad(2 * static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    for (int axis = 0; axis < 2; ++axis) {
      FiducialSet plus = C_prime, minus = C_prime;
      double& pv = axis == 0 ? plus.points[j].x : plus.points[j].y;
      double& mv = axis == 0 ? minus.points[j].x : minus.points[j].y;
      pv += h;
      mv -= h;
      grad[2 * j + axis] = (loss(plus) - loss(minus)) / (2.0 * h);
    }
  }
  return grad;
}

inline double max_rel_error(const std::vector<double>& got,
                            const std::vector<double>& want,
                            double abs_floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double denom = std::max(std::abs(want[i]), abs_floor);
    worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
  }
  return worst;
}

}  // namespace rcn::testutil
