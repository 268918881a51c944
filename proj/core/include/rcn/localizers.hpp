#pragma once

#include <vector>

#include "rcn/calibration.hpp"
#include "rcn/geometry.hpp"
#include "rcn/image.hpp"

namespace rcn {

// Predicts all-zero offsets; the calibration loop's fixed point.
class ZeroLocalizer : public Localizer {
 public:
  OffsetVector offsets(const Image&, const StepContext& ctx) const override;
};

struct OracleConfig {
  FiducialSet gt_fiducials;  // in the original frame
  double alpha = 1.0;        // damping in (0, 1]

  void validate() const;
};

// Moves fiducials a fraction alpha of the way toward the ground truth per
// step, using Newton inversion of the previous transform (or the whole chain
// in direct mode) to express the target in the current calibrated frame.
class OracleLocalizer : public Localizer {
 public:
  explicit OracleLocalizer(OracleConfig cfg);
  OffsetVector offsets(const Image&, const StepContext& ctx) const override;

 private:
  OracleConfig cfg_;
};

// Oracle variant that, at step 1 only, excludes a fraction of the ribbon
// length on the left side; later steps behave like an exact oracle. Used to
// provoke the information-loss behaviour that direct iteration cannot undo.
class CropBiasedLocalizer : public Localizer {
 public:
  CropBiasedLocalizer(FiducialSet gt_fiducials, double crop_fraction);
  OffsetVector offsets(const Image&, const StepContext& ctx) const override;

 private:
  FiducialSet gt_;
  double crop_;
};

// Training-free foreground-contour localizer: Otsu binarization (minority
// class as foreground), per-band 5th/95th percentile contour rows, 3-band
// moving-average smoothing.
class HeuristicLocalizer : public Localizer {
 public:
  OffsetVector offsets(const Image& img, const StepContext& ctx) const override;
};

struct DescentConfig {
  Image template_image;  // rectification target
  int steps = 100;
  double step_size = 1e-6;

  void validate() const;
};

struct DescentResult {
  OffsetVector offsets;
  double final_loss = 0.0;
};

// Fixed-step gradient descent on SSD(warp(img, T(C')), template) starting
// from C' = C, using the analytic fiducial gradients.
DescentResult descent_offsets(const Image& img, const FiducialSet& base,
                              const DescentConfig& cfg);

class DescentLocalizer : public Localizer {
 public:
  explicit DescentLocalizer(DescentConfig cfg);
  OffsetVector offsets(const Image& img, const StepContext& ctx) const override;

 private:
  DescentConfig cfg_;
};

// Otsu threshold over a 256-bin histogram of [0,1] intensities.
double otsu_threshold(const Image& gray);

}  // namespace rcn
