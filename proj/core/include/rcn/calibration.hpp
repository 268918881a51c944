#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rcn/geometry.hpp"
#include "rcn/image.hpp"

namespace rcn {

enum class Mode { kFpRefine, kDirect };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct CalibrationConfig {
  int iterations = 3;
  Mode mode = Mode::kFpRefine;
  int intermediate_h = 64, intermediate_w = 256;
  int final_h = 32, final_w = 100;
  int localizer_input_h = 32, localizer_input_w = 64;
  int K = 20;
  double margin = 0.0;

  void validate() const;
};

// Offset vectors are interleaved: [x_0, y_0, x_1, y_1, ...].
using OffsetVector = std::vector<double>;

FiducialSet apply_offsets(const FiducialSet& base, const OffsetVector& offsets);
OffsetVector offsets_between(const FiducialSet& base, const FiducialSet& target);

struct CalibrationStep {
  OffsetVector offsets;       // O_t, in the calibrated frame
  FiducialSet fiducials_cal;  // F_cal_t = C + O_t
  FiducialSet fiducials_ori;  // original-frame fiducials (fp-refine bookkeeping)
  TpsTransform transform;     // T_t
  Image output;               // I_t
};

struct CalibrationTrace {
  Image original;
  std::vector<CalibrationStep> steps;
  CalibrationConfig config;
};

// What a localizer sees besides the downsampled image.
struct StepContext {
  int step = 1;  // 1-based iteration index
  const TpsTransform* previous = nullptr;            // T_{t-1}, null at t=1
  const std::vector<CalibrationStep>* history = nullptr;  // all prior steps
  Mode mode = Mode::kFpRefine;
  FiducialSet base;  // canonical C
};

// Stand-in for the localization network: predicts per-fiducial coordinate
// offsets from a downsampled calibrated image.
class Localizer {
 public:
  virtual ~Localizer() = default;
  virtual OffsetVector offsets(const Image& downsampled,
                               const StepContext& ctx) const = 0;
};

// Runs one calibration iteration and appends nothing; callers own the trace.
CalibrationStep refine_step(const CalibrationTrace& state,
                            const Localizer& localizer,
                            const CalibrationConfig& config);

// Runs config.iterations refine steps. Intermediate outputs use
// intermediate_size, the last step final_size; fp-refine mode always
// resamples from the original image.
CalibrationTrace calibrate(const Image& original, const Localizer& localizer,
                           const CalibrationConfig& config);

}  // namespace rcn
