#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rcn/calibration.hpp"
#include "rcn/synth.hpp"

namespace rcn {

// Root mean squared Euclidean distance over point pairs, normalized units.
double fiducial_rmse(const FiducialSet& a, const FiducialSet& b);

// 10*log10(1/MSE) for [0,1] intensities, capped at 99 dB when MSE < 1e-10.
double psnr(const Image& a, const Image& b);

// Ground-truth rectifying transform of a sample: canonical base points to
// the sample's gt fiducials.
TpsTransform gt_rectifying_transform(const RibbonSample& sample, int K,
                                     double margin);

// Fraction of the gt-rectified foreground recovered by the trace's final
// image (fp-refine: one warp of the mask by the final transform; direct:
// the mask is chained through every step's warp, mirroring the image path).
double mask_coverage(const CalibrationTrace& trace, const RibbonSample& sample);

struct SampleReport {
  int sample_index = 0;
  std::string mode;
  int iterations = 0;
  std::vector<double> rmse_per_iter;   // fiducials_ori vs gt
  std::vector<double> psnr_per_iter;   // output vs gt-rectified reference
  double coverage = 0.0;               // final mask coverage
  bool failed = false;
  std::string error;
};

struct ReportRow {
  std::string mode;
  int iterations = 0;
  int n = 0;  // non-failed samples
  double rmse_mean = 0.0, rmse_std = 0.0;
  double psnr_mean = 0.0, psnr_std = 0.0;
  double coverage_mean = 0.0, coverage_std = 0.0;
  int failures = 0;
  std::vector<SampleReport> samples;
};

struct CorpusReport {
  std::string manifest_path;
  std::string localizer;
  std::vector<ReportRow> rows;
};

// Localizer selection for corpus evaluation; oracle-style kinds receive each
// sample's ground truth at construction time.
struct LocalizerSpec {
  std::string kind = "oracle";  // oracle | heuristic | descent | crop-oracle
  double alpha = 0.5;           // oracle damping
  double crop = 0.15;           // crop-oracle step-1 exclusion fraction
  int descent_steps = 100;
  double descent_step_size = 2e-7;

  std::string to_string() const;
};

// Parses "kind" or "kind:key=value,key=value" (e.g. "oracle:alpha=0.5").
LocalizerSpec parse_localizer_spec(const std::string& text);

std::unique_ptr<Localizer> make_localizer(const LocalizerSpec& spec,
                                          const RibbonSample& sample,
                                          const CalibrationConfig& config);

SampleReport eval_sample(const RibbonSample& sample, int index,
                         const LocalizerSpec& spec,
                         const CalibrationConfig& config);

// Runs calibrate per sample per (mode, iterations) config; per-sample
// failures are recorded, not fatal. Deterministic regardless of jobs.
CorpusReport eval_corpus(const CorpusManifest& manifest,
                         const LocalizerSpec& spec,
                         const std::vector<std::pair<Mode, int>>& configs,
                         const CalibrationConfig& base_config = {},
                         int jobs = 1);

// One row per (mode, iterations); mean/std are over final-iteration values.
std::string report_csv(const CorpusReport& report);
std::string report_json(const CorpusReport& report);

}  // namespace rcn
