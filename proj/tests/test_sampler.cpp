#include <doctest.h>

#include <cmath>

#include "rcn/errors.hpp"
#include "rcn/rng.hpp"
#include "rcn/sampler.hpp"
#include "test_util.hpp"

using namespace rcn;
using testutil::fd_loss_grad;
using testutil::max_rel_error;
using testutil::perturbed_fiducials;
using testutil::smooth_random_image;

namespace {

TpsTransform identity_transform(int K = 8) {
  const FiducialSet c = base_fiducials(K, 0.0);
  return estimate_tps(c, c);
}

}  // namespace

TEST_CASE("generate_grid identity corners and sizes") {
  const TpsTransform id = identity_transform();
  const SampleGrid g = generate_grid(id, 2, 2);
  CHECK(distance(g.at(0, 0), {-1, -1}) < 1e-12);
  CHECK(distance(g.at(0, 1), {1, -1}) < 1e-12);
  CHECK(distance(g.at(1, 0), {-1, 1}) < 1e-12);
  CHECK(distance(g.at(1, 1), {1, 1}) < 1e-12);

  const SampleGrid large = generate_grid(id, 32, 100);
  CHECK(large.coords.size() == 3200);
}

TEST_CASE("generate_grid translation offsets the identity grid") {
  const FiducialSet c = base_fiducials(8, 0.0);
  FiducialSet shifted = c;
  for (Point2& p : shifted.points) p.x += 0.1;
  const SampleGrid g = generate_grid(estimate_tps(c, shifted), 4, 8);
  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col < 8; ++col) {
      const Point2 expect{pixel_to_norm(col, 8) + 0.1, pixel_to_norm(r, 4)};
      CHECK(distance(g.at(r, col), expect) < 1e-9);
    }
  }
}

TEST_CASE("bilinear_sample identity resample is exact") {
  CounterRng rng(1, 0);
  Image img(16, 24, 1);
  for (double& v : img.data) v = rng.next_unit();
  const Image out = bilinear_sample(img, generate_grid(identity_transform(), 16, 24));
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    CHECK(std::abs(out.data[i] - img.data[i]) <= 1e-12);
  }
}

TEST_CASE("bilinear_sample zero pads outside the frame") {
  Image img(8, 8, 1, 0.5);
  SampleGrid g;
  g.height = 4;
  g.width = 4;
  g.coords.assign(16, Point2{-5.0, -5.0});
  const Image out = bilinear_sample(img, g);
  for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("bilinear_sample of a constant stays constant in bounds") {
  Image img(8, 8, 1, 0.7);
  CounterRng rng(2, 0);
  SampleGrid g;
  g.height = 5;
  g.width = 5;
  for (int i = 0; i < 25; ++i) {
    g.coords.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  }
  const Image out = bilinear_sample(img, g);
  for (double v : out.data) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("warp mirrors an image when fiducials are mirrored") {
  CounterRng rng(3, 0);
  Image img(16, 32, 1);
  for (double& v : img.data) v = rng.next_unit();
  const FiducialSet c = base_fiducials(8, 0.0);
  FiducialSet mirrored = c;
  for (Point2& p : mirrored.points) p.x = -p.x;
  const Image out = warp(img, estimate_tps(c, mirrored), 16, 32);
  for (int r = 0; r < 16; ++r) {
    for (int col = 0; col < 32; ++col) {
      CHECK(std::abs(out.at(r, col) - img.at(r, 31 - col)) < 1e-6);
    }
  }
}

TEST_CASE("warp is linear in intensities") {
  CounterRng rng(4, 0);
  Image a(12, 20, 1), b(12, 20, 1);
  for (double& v : a.data) v = rng.next_unit();
  for (double& v : b.data) v = rng.next_unit();
  const FiducialSet c = base_fiducials(8, 0.0);
  const TpsTransform t = estimate_tps(c, perturbed_fiducials(8, 0.2, rng));

  Image mix(12, 20, 1);
  const double s0 = 0.3, s1 = 0.6;
  for (std::size_t i = 0; i < mix.data.size(); ++i) {
    mix.data[i] = s0 * a.data[i] + s1 * b.data[i];
  }
  const Image wa = warp(a, t, 10, 16);
  const Image wb = warp(b, t, 10, 16);
  const Image wmix = warp(mix, t, 10, 16);
  for (std::size_t i = 0; i < wmix.data.size(); ++i) {
    CHECK(std::abs(wmix.data[i] - (s0 * wa.data[i] + s1 * wb.data[i])) <=
          1e-10);
  }
}

TEST_CASE("fiducial gradient vanishes for constant images and zero adjoints") {
  const FiducialSet c = base_fiducials(8, 0.0);
  CounterRng rng(5, 0);

  // Keep the sampled region strictly interior so no pixel sees the
  // zero-padded border, where even a constant image has a gradient.
  FiducialSet interior = c;
  for (Point2& p : interior.points) {
    p.x *= 0.8;
    p.y *= 0.8;
  }
  Image constant(16, 32, 1, 0.4);
  Image adjoint(8, 16, 1, 1.0);
  for (double g :
       loss_grad_wrt_fiducials(constant, c, interior, 8, 16, adjoint)) {
    CHECK(std::abs(g) < 1e-12);
  }

  const FiducialSet target = perturbed_fiducials(8, 0.15, rng);
  const Image img = smooth_random_image(16, 32, rng);
  Image zero_adjoint(8, 16, 1, 0.0);
  for (double g : loss_grad_wrt_fiducials(img, c, target, 8, 16, zero_adjoint)) {
    CHECK(g == 0.0);
  }
}

TEST_CASE("fiducial gradient matches finite differences") {
  CounterRng rng(6, 0);
  for (int rep = 0; rep < 5; ++rep) {
    const FiducialSet c = base_fiducials(8, 0.0);
    const FiducialSet target = perturbed_fiducials(8, 0.15, rng);
    const Image img = smooth_random_image(32, 64, rng);
    const Image adjoint =
        testutil::interior_cell_adjoint(img, c, target, 16, 40);
    const auto analytic =
        loss_grad_wrt_fiducials(img, c, target, 16, 40, adjoint);
    const auto fd = fd_loss_grad(img, c, target, 16, 40, adjoint);
    // Relative tolerance 1e-3 with an absolute floor of 1e-8.
    CHECK(max_rel_error(analytic, fd, 1e-5) < 1e-3);
  }
}

TEST_CASE("fiducial gradient rejects mismatched adjoints") {
  const FiducialSet c = base_fiducials(8, 0.0);
  Image img(16, 32, 1, 0.5);
  Image adjoint(4, 4, 1, 1.0);
  CHECK_THROWS_AS(loss_grad_wrt_fiducials(img, c, c, 8, 16, adjoint),
                  ShapeMismatchError);
}

TEST_CASE("downsample_area averages boxes exactly") {
  Image img(4, 4, 1);
  for (int i = 0; i < 16; ++i) img.data[i] = static_cast<double>(i) / 16.0;
  const Image out = downsample_area(img, 2, 2);
  CHECK(out.at(0, 0) ==
        doctest::Approx((0 + 1 + 4 + 5) / 4.0 / 16.0).epsilon(1e-12));
  CHECK(out.at(1, 1) ==
        doctest::Approx((10 + 11 + 14 + 15) / 4.0 / 16.0).epsilon(1e-12));

  Image constant(7, 11, 1, 0.3);
  for (double v : downsample_area(constant, 3, 5).data) {
    CHECK(v == doctest::Approx(0.3).epsilon(1e-12));
  }
}

TEST_CASE("gaussian_blur preserves constants") {
  Image constant(8, 8, 1, 0.25);
  for (double v : gaussian_blur(constant, 1.5).data) {
    CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }
}
