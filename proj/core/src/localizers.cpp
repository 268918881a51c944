#include "rcn/localizers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rcn/errors.hpp"
#include "rcn/sampler.hpp"

namespace rcn {

OffsetVector ZeroLocalizer::offsets(const Image&, const StepContext& ctx) const {
  return OffsetVector(2 * static_cast<std::size_t>(ctx.base.K()), 0.0);
}

void OracleConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw InvalidArgumentError("oracle damping must lie in (0, 1]");
  }
  gt_fiducials.validate();
}

OracleLocalizer::OracleLocalizer(OracleConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

namespace {

// Expresses an original-frame point in the current calibrated frame by
// inverting the transform history (one transform in fp-refine mode, the whole
// chain in direct mode).
Point2 to_current_frame(Point2 original, const StepContext& ctx) {
  if (ctx.step == 1) return original;
  if (ctx.mode == Mode::kFpRefine) {
    return invert_map(*ctx.previous, original);
  }
  Point2 p = original;
  for (const CalibrationStep& s : *ctx.history) {
    p = invert_map(s.transform, p);
  }
  return p;
}

OffsetVector damped_offsets_toward(const FiducialSet& gt, double alpha,
                                   const StepContext& ctx) {
  if (gt.K() != ctx.base.K()) {
    throw ShapeMismatchError("oracle ground truth has wrong fiducial count");
  }
  OffsetVector out(2 * static_cast<std::size_t>(gt.K()));
  for (int j = 0; j < gt.K(); ++j) {
    const Point2 d = to_current_frame(gt.points[j], ctx);
    out[2 * j] = alpha * (d.x - ctx.base.points[j].x);
    out[2 * j + 1] = alpha * (d.y - ctx.base.points[j].y);
  }
  return out;
}

// Piecewise-linear interpolation along a fiducial row at index fraction u.
Point2 polyline_at(const std::vector<Point2>& row, double u) {
  const int n = static_cast<int>(row.size());
  const double s = std::clamp(u, 0.0, 1.0) * (n - 1);
  const int i0 = std::min(n - 2, static_cast<int>(std::floor(s)));
  const double a = s - i0;
  return {row[i0].x * (1 - a) + row[i0 + 1].x * a,
          row[i0].y * (1 - a) + row[i0 + 1].y * a};
}

}  // namespace

OffsetVector OracleLocalizer::offsets(const Image&, const StepContext& ctx) const {
  return damped_offsets_toward(cfg_.gt_fiducials, cfg_.alpha, ctx);
}

CropBiasedLocalizer::CropBiasedLocalizer(FiducialSet gt_fiducials,
                                         double crop_fraction)
    : gt_(std::move(gt_fiducials)), crop_(crop_fraction) {
  gt_.validate();
  if (!(crop_ >= 0.0 && crop_ < 1.0)) {
    throw InvalidArgumentError("crop fraction must lie in [0, 1)");
  }
}

OffsetVector CropBiasedLocalizer::offsets(const Image&,
                                          const StepContext& ctx) const {
  if (ctx.step > 1) {
    return damped_offsets_toward(gt_, 1.0, ctx);
  }
  // Step 1: target only the right (1 - crop) fraction of the ribbon.
  const int half = gt_.K() / 2;
  std::vector<Point2> top(gt_.points.begin(), gt_.points.begin() + half);
  std::vector<Point2> bottom(gt_.points.begin() + half, gt_.points.end());
  FiducialSet cropped;
  cropped.points.resize(gt_.K());
  for (int i = 0; i < half; ++i) {
    const double u = crop_ + (1.0 - crop_) * (half == 1 ? 0.0 : static_cast<double>(i) / (half - 1));
    cropped.points[i] = polyline_at(top, u);
    cropped.points[half + i] = polyline_at(bottom, u);
  }
  return offsets_between(ctx.base, cropped);
}

double otsu_threshold(const Image& gray) {
  constexpr int kBins = 256;
  std::vector<double> hist(kBins, 0.0);
  for (double v : gray.data) {
    const int b = std::clamp(static_cast<int>(v * (kBins - 1) + 0.5), 0, kBins - 1);
    hist[b] += 1.0;
  }
  const double total = static_cast<double>(gray.data.size());
  double sum_all = 0.0;
  for (int b = 0; b < kBins; ++b) sum_all += b * hist[b];

  double best_var = -1.0;
  int best_bin = kBins / 2;
  double w0 = 0.0, sum0 = 0.0;
  for (int b = 0; b < kBins - 1; ++b) {
    w0 += hist[b];
    sum0 += b * hist[b];
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best_var) {
      best_var = between;
      best_bin = b;
    }
  }
  return (best_bin + 0.5) / (kBins - 1);
}

OffsetVector HeuristicLocalizer::offsets(const Image& img,
                                         const StepContext& ctx) const {
  const Image gray = to_gray(img);
  const double threshold = otsu_threshold(gray);

  std::size_t above = 0;
  for (double v : gray.data) above += v > threshold ? 1 : 0;
  const bool fg_above = above * 2 <= gray.data.size();  // minority class
  std::size_t fg_count = fg_above ? above : gray.data.size() - above;
  if (fg_count < gray.data.size() / 100) {
    throw NoForegroundError("fewer than 1% foreground pixels");
  }

  const int half = ctx.base.K() / 2;
  const int w = gray.width, h = gray.height;
  std::vector<double> top_row(half, -1.0), bottom_row(half, -1.0);
  std::vector<bool> occupied(half, false);
  for (int band = 0; band < half; ++band) {
    const int c0 = band * w / half;
    const int c1 = std::max(c0 + 1, (band + 1) * w / half);
    // Distinct rows containing foreground; using distinct rows rather than
    // the pixel multiset keeps the percentile free of density weighting (a
    // glyph tapers toward its apex, so extreme rows hold few pixels).
    std::vector<int> rows;
    for (int r = 0; r < h; ++r) {
      for (int c = c0; c < c1; ++c) {
        const bool fg = fg_above ? gray.at(r, c) > threshold
                                 : gray.at(r, c) <= threshold;
        if (fg) {
          rows.push_back(r);
          break;
        }
      }
    }
    if (rows.empty()) continue;
    const int n = static_cast<int>(rows.size());
    // Floor on the low index and ceil on the high one keep the two
    // percentiles symmetric about the band.
    const double lo = rows[static_cast<int>(std::floor(0.05 * (n - 1)))];
    const double hi = rows[static_cast<int>(std::ceil(0.95 * (n - 1)))];
    // The trimmed percentiles sit inside the band; extrapolate them back to
    // the full extent and add half a pixel for the anti-aliased edge. Any
    // residual inward bias would otherwise compound across refinement steps:
    // rectifying against inward-biased fiducials stretches the band, scaling
    // the same bias up on the next detection.
    const double trim = 0.05 / 0.90 * (hi - lo);
    top_row[band] = lo - trim - 0.5;
    bottom_row[band] = hi + trim + 0.5;
    occupied[band] = true;
  }
  // Fill empty bands from the nearest occupied one.
  for (int band = 0; band < half; ++band) {
    if (occupied[band]) continue;
    int nearest = -1, best = half + 1;
    for (int other = 0; other < half; ++other) {
      if (occupied[other] && std::abs(other - band) < best) {
        best = std::abs(other - band);
        nearest = other;
      }
    }
    top_row[band] = top_row[nearest];
    bottom_row[band] = bottom_row[nearest];
  }
  // The outermost strips straddle the ribbon's ends, where the contour is cut
  // diagonally by the band terminus rather than bounded by its long edges;
  // their raw extremes are unreliable. Extrapolate them from the interior.
  if (half >= 4) {
    top_row[0] = 2.0 * top_row[1] - top_row[2];
    bottom_row[0] = 2.0 * bottom_row[1] - bottom_row[2];
    top_row[half - 1] = 2.0 * top_row[half - 2] - top_row[half - 3];
    bottom_row[half - 1] = 2.0 * bottom_row[half - 2] - bottom_row[half - 3];
  }
  // 3-band moving average.
  const auto smooth = [half](const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (int i = 0; i < half; ++i) {
      double acc = v[i];
      int n = 1;
      if (i > 0) { acc += v[i - 1]; ++n; }
      if (i + 1 < half) { acc += v[i + 1]; ++n; }
      out[i] = acc / n;
    }
    return out;
  };
  const std::vector<double> top_s = smooth(top_row);
  const std::vector<double> bottom_s = smooth(bottom_row);

  // The contour is resolved to one pixel row; offsets below that resolution
  // are quantization noise, not signal, and repeatedly applying them would
  // make a calibrated band drift. Treat them as zero.
  const double deadband = 2.0 / (h - 1);
  const auto snap = [deadband](double v) {
    return std::abs(v) <= deadband ? 0.0 : v;
  };
  OffsetVector out(2 * static_cast<std::size_t>(ctx.base.K()), 0.0);
  for (int j = 0; j < half; ++j) {
    const double y_top = -1.0 + 2.0 * top_s[j] / (h - 1);
    const double y_bottom = -1.0 + 2.0 * bottom_s[j] / (h - 1);
    out[2 * j + 1] = snap(y_top - ctx.base.points[j].y);
    out[2 * (half + j) + 1] = snap(y_bottom - ctx.base.points[half + j].y);
  }
  return out;
}

void DescentConfig::validate() const {
  if (steps < 1) throw InvalidArgumentError("descent steps must be >= 1");
  if (!(step_size > 0.0)) throw InvalidArgumentError("step_size must be > 0");
  template_image.validate();
}

DescentResult descent_offsets(const Image& img, const FiducialSet& base,
                              const DescentConfig& cfg) {
  cfg.validate();
  const int th = cfg.template_image.height;
  const int tw = cfg.template_image.width;
  FiducialSet current = base;
  double loss = 0.0;
  for (int it = 0; it < cfg.steps; ++it) {
    const TpsTransform T = estimate_tps(base, current);
    const Image out = warp(img, T, th, tw);
    Image adjoint(th, tw, out.channels);
    loss = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      const double r = out.data[i] - cfg.template_image.data[i];
      loss += r * r;
      adjoint.data[i] = 2.0 * r;
    }
    if (!std::isfinite(loss)) {
      throw DivergenceError("descent loss became non-finite");
    }
    const std::vector<double> g =
        loss_grad_wrt_fiducials(img, base, current, th, tw, adjoint);
    for (int j = 0; j < base.K(); ++j) {
      current.points[j].x -= cfg.step_size * g[2 * j];
      current.points[j].y -= cfg.step_size * g[2 * j + 1];
    }
  }
  return {offsets_between(base, current), loss};
}

DescentLocalizer::DescentLocalizer(DescentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

OffsetVector DescentLocalizer::offsets(const Image& img,
                                       const StepContext& ctx) const {
  return descent_offsets(img, ctx.base, cfg_).offsets;
}

}  // namespace rcn
