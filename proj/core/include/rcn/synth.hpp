#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcn/geometry.hpp"
#include "rcn/image.hpp"

namespace rcn {

// Parametric distortion family applied to the band fiducials of a clean
// ribbon.
struct WarpFamily {
  enum class Kind { kCurve, kPerspective, kSine, kSlant };

  Kind kind = Kind::kCurve;
  double p0 = 0.0;  // curvature / corner displacement / amplitude / shear
  int period = 1;   // sine only, 1 or 2

  void validate() const;
};

std::string family_kind_name(WarpFamily::Kind kind);
WarpFamily::Kind family_kind_from_name(const std::string& name);

// Closed-form displacement of the band fiducials, rescaled to stay inside
// the frame. This is the ground-truth fiducial set of the distorted image.
FiducialSet displace_band_fiducials(const FiducialSet& band,
                                    const WarpFamily& family);

struct RibbonSample {
  Image image;              // distorted ribbon
  Image gt_mask;            // binary foreground raster (0/1)
  FiducialSet gt_fiducials; // in the distorted image frame, normalized
  WarpFamily family;
  std::uint64_t seed = 0;

  // Generation-time extras, not persisted to disk.
  Image clean_image;
  FiducialSet band_fiducials;  // fiducials bounding the clean ribbon band
};

// Deterministic synthetic sample: an alternating-blob ribbon along a straight
// baseline, distorted by the TPS transform the displaced fiducials define.
RibbonSample gen_ribbon(std::uint64_t seed, const WarpFamily& family,
                        int K = 20, int height = 64, int width = 256);

struct FamilyMix {
  double curve = 1.0;
  double perspective = 1.0;
  double sine = 1.0;
  double slant = 1.0;
};

struct ParamRanges {
  double kappa_min = -0.4, kappa_max = 0.4;
  double perspective_min = 0.0, perspective_max = 0.3;
  double sine_amp_min = 0.0, sine_amp_max = 0.3;
  double slant_min = -0.5, slant_max = 0.5;
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  std::string generator_version;
  std::vector<std::string> sidecars;  // paths relative to the manifest
  std::string path;                   // manifest file location
};

// Writes n samples (PNG image + mask PNG + JSON sidecar) plus a manifest to
// out_dir. Pure function of (seed, n, mix, K, size, ranges).
CorpusManifest gen_corpus(std::uint64_t seed, int n, const FamilyMix& mix,
                          const std::string& out_dir, int K = 20,
                          int height = 64, int width = 256,
                          const ParamRanges& ranges = {});

CorpusManifest load_manifest(const std::string& manifest_path);

// Reloads a sample from its sidecar (clean_image / band_fiducials stay empty).
RibbonSample load_sample(const std::string& sidecar_path);

}  // namespace rcn
