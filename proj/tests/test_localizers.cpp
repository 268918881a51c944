#include <doctest.h>

#include <cmath>

#include "rcn/calibration.hpp"
#include "rcn/errors.hpp"
#include "rcn/localizers.hpp"
#include "rcn/metrics.hpp"
#include "rcn/rng.hpp"
#include "rcn/sampler.hpp"
#include "rcn/synth.hpp"

using namespace rcn;

namespace {

RibbonSample curve_sample(std::uint64_t seed = 9, double kappa = 0.3) {
  WarpFamily family;
  family.kind = WarpFamily::Kind::kCurve;
  family.p0 = kappa;
  return gen_ribbon(seed, family);
}

// Axis-aligned bright ribbon filling rows [r0, r1) of a dark image.
Image band_image(int h, int w, int r0, int r1) {
  Image img(h, w, 1, 0.05);
  for (int r = r0; r < r1; ++r) {
    for (int c = 0; c < w; ++c) img.at(r, c) = 0.95;
  }
  return img;
}

StepContext first_step_context(int K = 20) {
  StepContext ctx;
  ctx.step = 1;
  ctx.base = base_fiducials(K, 0.0);
  return ctx;
}

}  // namespace

TEST_CASE("oracle offsets at step one are direct differences") {
  const RibbonSample sample = curve_sample();
  OracleConfig cfg;
  cfg.gt_fiducials = sample.gt_fiducials;
  cfg.alpha = 1.0;
  const OracleLocalizer oracle(cfg);
  const StepContext ctx = first_step_context();
  const Image dummy(32, 64, 1, 0.5);
  const OffsetVector got = oracle.offsets(dummy, ctx);
  const OffsetVector want = offsets_between(ctx.base, sample.gt_fiducials);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("oracle with alpha=1 stays on the ground truth at every step") {
  const RibbonSample sample = curve_sample();
  OracleConfig cfg;
  cfg.gt_fiducials = sample.gt_fiducials;
  cfg.alpha = 1.0;
  const OracleLocalizer oracle(cfg);
  CalibrationConfig config;
  const CalibrationTrace trace = calibrate(sample.image, oracle, config);
  for (const CalibrationStep& step : trace.steps) {
    CHECK(fiducial_rmse(step.fiducials_ori, sample.gt_fiducials) <= 1e-6);
  }
}

TEST_CASE("oracle is quiet when already calibrated") {
  OracleConfig cfg;
  cfg.gt_fiducials = base_fiducials(20, 0.0);
  cfg.alpha = 0.5;
  const OracleLocalizer oracle(cfg);
  const Image dummy(32, 64, 1, 0.5);
  for (double v : oracle.offsets(dummy, first_step_context())) {
    CHECK(std::abs(v) < 1e-12);
  }
}

TEST_CASE("damped oracle contracts the fiducial error per step") {
  const RibbonSample sample = curve_sample();
  OracleConfig cfg;
  cfg.gt_fiducials = sample.gt_fiducials;
  cfg.alpha = 0.5;
  const OracleLocalizer oracle(cfg);
  CalibrationConfig config;
  const CalibrationTrace trace = calibrate(sample.image, oracle, config);
  double prev = fiducial_rmse(base_fiducials(config.K, config.margin),
                              sample.gt_fiducials);
  for (const CalibrationStep& step : trace.steps) {
    const double rmse = fiducial_rmse(step.fiducials_ori, sample.gt_fiducials);
    CHECK(rmse < prev);
    CHECK(rmse < 0.75 * prev);  // roughly halves for smooth warps
    prev = rmse;
  }
}

TEST_CASE("oracle config rejects bad damping") {
  OracleConfig cfg;
  cfg.gt_fiducials = base_fiducials(8, 0.0);
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(OracleLocalizer{cfg}, InvalidArgumentError);
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(OracleLocalizer{cfg}, InvalidArgumentError);
}

TEST_CASE("heuristic tracks an off-center band") {
  const Image img = band_image(32, 64, 4, 18);
  const HeuristicLocalizer heuristic;
  const OffsetVector offsets = heuristic.offsets(img, first_step_context());
  // Top contour at row 4 (y = -0.742), bottom contour at row 17 (y = 0.097).
  const int half = 10;
  for (int j = 0; j < half; ++j) {
    CHECK(offsets[2 * j + 1] > 0.15);
    CHECK(offsets[2 * j + 1] < 0.40);
    CHECK(offsets[2 * (half + j) + 1] > -1.0);
    CHECK(offsets[2 * (half + j) + 1] < -0.80);
  }
}

TEST_CASE("heuristic reports no foreground on blank images") {
  const Image blank(32, 64, 1, 0.5);
  const HeuristicLocalizer heuristic;
  CHECK_THROWS_AS(heuristic.offsets(blank, first_step_context()),
                  NoForegroundError);
}

TEST_CASE("heuristic localizes a middle-half ribbon") {
  const Image img = band_image(32, 64, 8, 24);  // vertical middle half
  const HeuristicLocalizer heuristic;
  const OffsetVector offsets = heuristic.offsets(img, first_step_context());
  const int half = 10;
  for (int j = 0; j < half; ++j) {
    CHECK(offsets[2 * j + 1] == doctest::Approx(0.5).epsilon(0.2));
    CHECK(offsets[2 * (half + j) + 1] == doctest::Approx(-0.5).epsilon(0.2));
  }
}

TEST_CASE("heuristic handles light-on-dark and dark-on-light") {
  const Image light = band_image(32, 64, 10, 22);
  Image dark = light;
  for (double& v : dark.data) v = 1.0 - v;
  const HeuristicLocalizer heuristic;
  const OffsetVector a = heuristic.offsets(light, first_step_context());
  const OffsetVector b = heuristic.offsets(dark, first_step_context());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
  }
}

TEST_CASE("otsu splits a bimodal histogram") {
  Image img(16, 16, 1);
  for (int i = 0; i < 128; ++i) img.data[i] = 0.2;
  for (int i = 128; i < 256; ++i) img.data[i] = 0.8;
  const double t = otsu_threshold(img);
  CHECK(t > 0.2);
  CHECK(t < 0.8);
}

TEST_CASE("descent is near-silent at the optimum") {
  const RibbonSample sample = curve_sample();
  const Image small = downsample_area(sample.image, 32, 64);
  DescentConfig cfg;
  cfg.template_image = small;  // already equal to the identity warp target
  cfg.steps = 5;
  cfg.step_size = 1e-7;
  const DescentResult res =
      descent_offsets(small, base_fiducials(20, 0.0), cfg);
  double worst = 0.0;
  for (double v : res.offsets) worst = std::max(worst, std::abs(v));
  CHECK(worst < 0.02);
}

TEST_CASE("descent recovers a small translation") {
  CounterRng rng(31, 0);
  Image img(32, 64, 1);
  for (double& v : img.data) v = rng.next_unit();
  img = gaussian_blur(img, 3.0);

  // Template: the image translated 3 pixels to the right.
  const FiducialSet base = base_fiducials(20, 0.0);
  FiducialSet shifted = base;
  const double dx = 2.0 * 3.0 / 63.0;  // 3 pixels in normalized units
  for (Point2& p : shifted.points) p.x += dx;
  const Image tmpl = warp(img, estimate_tps(base, shifted), 32, 64);

  DescentConfig cfg;
  cfg.template_image = tmpl;
  cfg.steps = 1000;
  cfg.step_size = 2e-4;
  const DescentResult res = descent_offsets(img, base, cfg);
  double mean_dx = 0.0;
  for (int j = 0; j < base.K(); ++j) mean_dx += res.offsets[2 * j];
  mean_dx /= base.K();
  // Blurred noise gives a shallow SSD basin; expect to recover the bulk of
  // the shift, not the last fraction of a pixel.
  CHECK(mean_dx > 0.6 * dx);
  CHECK(mean_dx < 1.4 * dx);
}

TEST_CASE("descent loss is non-increasing for small steps") {
  const RibbonSample sample = curve_sample();
  const Image small = downsample_area(sample.image, 32, 64);
  const TpsTransform gt_t = gt_rectifying_transform(sample, 20, 0.0);
  DescentConfig cfg;
  cfg.template_image = warp(sample.image, gt_t, 32, 64);
  cfg.step_size = 1e-7;
  const FiducialSet base = base_fiducials(20, 0.0);
  double prev_loss = std::numeric_limits<double>::infinity();
  for (int steps : {1, 5, 20, 80}) {
    cfg.steps = steps;
    const double loss = descent_offsets(small, base, cfg).final_loss;
    CHECK(loss <= prev_loss + 1e-9);
    prev_loss = loss;
  }
}

TEST_CASE("descent config validation") {
  DescentConfig cfg;
  cfg.template_image = Image(8, 8, 1, 0.5);
  cfg.step_size = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
  cfg.step_size = 1e-6;
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
}

TEST_CASE("crop-biased localizer shortens the first-step target span") {
  const RibbonSample sample = curve_sample();
  const CropBiasedLocalizer cropped(sample.gt_fiducials, 0.15);
  const StepContext ctx = first_step_context();
  const Image dummy(32, 64, 1, 0.5);
  const FiducialSet target =
      apply_offsets(ctx.base, cropped.offsets(dummy, ctx));
  const double full_span = sample.gt_fiducials.points[9].x -
                           sample.gt_fiducials.points[0].x;
  const double crop_span = target.points[9].x - target.points[0].x;
  CHECK(crop_span == doctest::Approx(0.85 * full_span).epsilon(0.05));
  // The right edge is preserved, the left edge moves inward.
  CHECK(target.points[9].x ==
        doctest::Approx(sample.gt_fiducials.points[9].x).epsilon(1e-9));
  CHECK(target.points[0].x > sample.gt_fiducials.points[0].x);
}
