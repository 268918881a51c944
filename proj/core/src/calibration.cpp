#include "rcn/calibration.hpp"

#include <cmath>

#include "rcn/errors.hpp"
#include "rcn/sampler.hpp"

namespace rcn {

std::string mode_name(Mode m) {
  return m == Mode::kFpRefine ? "fp-refine" : "direct";
}

Mode mode_from_name(const std::string& name) {
  if (name == "fp-refine" || name == "fp_refine") return Mode::kFpRefine;
  if (name == "direct") return Mode::kDirect;
  throw InvalidArgumentError("unknown mode: " + name);
}

void CalibrationConfig::validate() const {
  if (iterations < 1) throw InvalidArgumentError("iterations must be >= 1");
  if (intermediate_h < 2 || intermediate_w < 2 || final_h < 2 || final_w < 2 ||
      localizer_input_h < 2 || localizer_input_w < 2) {
    throw InvalidArgumentError("all raster sizes must be at least 2x2");
  }
  base_fiducials(K, margin);  // validates K and margin
}

FiducialSet apply_offsets(const FiducialSet& base, const OffsetVector& offsets) {
  if (offsets.size() != 2 * static_cast<std::size_t>(base.K())) {
    throw ShapeMismatchError("offset vector length must be 2K");
  }
  FiducialSet out = base;
  for (int j = 0; j < base.K(); ++j) {
    out.points[j].x += offsets[2 * j];
    out.points[j].y += offsets[2 * j + 1];
  }
  return out;
}

OffsetVector offsets_between(const FiducialSet& base, const FiducialSet& target) {
  if (base.K() != target.K()) {
    throw ShapeMismatchError("fiducial count mismatch");
  }
  OffsetVector out(2 * static_cast<std::size_t>(base.K()));
  for (int j = 0; j < base.K(); ++j) {
    out[2 * j] = target.points[j].x - base.points[j].x;
    out[2 * j + 1] = target.points[j].y - base.points[j].y;
  }
  return out;
}

CalibrationStep refine_step(const CalibrationTrace& state,
                            const Localizer& localizer,
                            const CalibrationConfig& config) {
  const int t = static_cast<int>(state.steps.size()) + 1;
  const FiducialSet base = base_fiducials(config.K, config.margin);
  const Image& localizer_source =
      t == 1 ? state.original : state.steps.back().output;

  StepContext ctx;
  ctx.step = t;
  ctx.previous = t > 1 ? &state.steps.back().transform : nullptr;
  ctx.history = &state.steps;
  ctx.mode = config.mode;
  ctx.base = base;

  const Image down = downsample_area(localizer_source, config.localizer_input_h,
                                     config.localizer_input_w);
  OffsetVector offsets = localizer.offsets(down, ctx);
  for (double v : offsets) {
    if (!std::isfinite(v)) {
      throw DegenerateFiducialsError("localizer produced non-finite offsets", t);
    }
  }

  CalibrationStep step;
  step.offsets = std::move(offsets);
  step.fiducials_cal = apply_offsets(base, step.offsets);

  try {
    if (config.mode == Mode::kFpRefine) {
      if (t == 1) {
        // First input is the original image: the mapping back is the identity.
        step.fiducials_ori = step.fiducials_cal;
      } else {
        step.fiducials_ori.points.reserve(base.K());
        for (const Point2& p : step.fiducials_cal.points) {
          step.fiducials_ori.points.push_back(
              map_point(state.steps.back().transform, p));
        }
      }
      step.transform = estimate_tps(base, step.fiducials_ori);
    } else {
      // Direct mode: re-estimate against the previous output and chain the
      // resampling; fiducials_ori records the composed original-frame
      // positions for reporting only.
      step.transform = estimate_tps(base, step.fiducials_cal);
      step.fiducials_ori = step.fiducials_cal;
      for (auto it = state.steps.rbegin(); it != state.steps.rend(); ++it) {
        for (Point2& p : step.fiducials_ori.points) {
          p = map_point(it->transform, p);
        }
      }
    }
  } catch (const Error& e) {
    throw DegenerateFiducialsError(
        "step " + std::to_string(t) + ": " + e.what(), t);
  }

  const bool last = t == config.iterations;
  const int out_h = last ? config.final_h : config.intermediate_h;
  const int out_w = last ? config.final_w : config.intermediate_w;
  const Image& source = config.mode == Mode::kFpRefine || t == 1
                            ? state.original
                            : state.steps.back().output;
  step.output = warp(source, step.transform, out_h, out_w);
  return step;
}

CalibrationTrace calibrate(const Image& original, const Localizer& localizer,
                           const CalibrationConfig& config) {
  config.validate();
  original.validate();
  CalibrationTrace trace;
  trace.original = original;
  trace.config = config;
  trace.steps.reserve(config.iterations);
  for (int t = 1; t <= config.iterations; ++t) {
    trace.steps.push_back(refine_step(trace, localizer, config));
  }
  return trace;
}

}  // namespace rcn
