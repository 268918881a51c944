#include "rcn/synth.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rcn/errors.hpp"
#include "rcn/png_io.hpp"
#include "rcn/rng.hpp"
#include "rcn/sampler.hpp"

namespace rcn {

namespace {

// Geometry of the clean ribbon in normalized coordinates.
constexpr double kBandHalfHeight = 0.6;
constexpr double kFiducialXExtent = 0.92;
constexpr double kBlobXExtent = 0.85;
constexpr double kFrameLimit = 0.98;

}  // namespace

void WarpFamily::validate() const {
  switch (kind) {
    case Kind::kCurve:
      if (std::abs(p0) > 0.5) {
        throw InvalidArgumentError("curvature must lie in [-0.5, 0.5]");
      }
      break;
    case Kind::kPerspective:
      if (p0 < 0.0 || p0 > 0.3) {
        throw InvalidArgumentError("corner displacement must lie in [0, 0.3]");
      }
      break;
    case Kind::kSine:
      if (p0 < 0.0 || p0 > 0.3) {
        throw InvalidArgumentError("sine amplitude must lie in [0, 0.3]");
      }
      if (period != 1 && period != 2) {
        throw InvalidArgumentError("sine period must be 1 or 2");
      }
      break;
    case Kind::kSlant:
      if (std::abs(p0) > 0.5) {
        throw InvalidArgumentError("shear must lie in [-0.5, 0.5]");
      }
      break;
  }
}

std::string family_kind_name(WarpFamily::Kind kind) {
  switch (kind) {
    case WarpFamily::Kind::kCurve: return "curve";
    case WarpFamily::Kind::kPerspective: return "perspective";
    case WarpFamily::Kind::kSine: return "sine";
    case WarpFamily::Kind::kSlant: return "slant";
  }
  throw InvalidArgumentError("bad family kind");
}

WarpFamily::Kind family_kind_from_name(const std::string& name) {
  if (name == "curve") return WarpFamily::Kind::kCurve;
  if (name == "perspective") return WarpFamily::Kind::kPerspective;
  if (name == "sine") return WarpFamily::Kind::kSine;
  if (name == "slant") return WarpFamily::Kind::kSlant;
  throw InvalidArgumentError("unknown family kind: " + name);
}

namespace {

// Homography mapping the unit frame to a trapezoid whose top-left and
// bottom-right corners move inward by d.
Eigen::Matrix3d perspective_homography(double d) {
  const double src[4][2] = {{-1, -1}, {1, -1}, {-1, 1}, {1, 1}};
  const double dst[4][2] = {{-1 + d, -1}, {1, -1}, {-1, 1}, {1 - d, 1}};
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i][0], y = src[i][1];
    const double u = dst[i][0], v = dst[i][1];
    a.row(2 * i) << x, y, 1, 0, 0, 0, -x * u, -y * u;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -x * v, -y * v;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.partialPivLu().solve(b);
  Eigen::Matrix3d m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return m;
}

Point2 apply_family(Point2 p, const WarpFamily& f,
                    const Eigen::Matrix3d* homography) {
  switch (f.kind) {
    case WarpFamily::Kind::kCurve:
      return {p.x, p.y + f.p0 * (p.x * p.x - 1.0)};
    case WarpFamily::Kind::kSine:
      return {p.x, p.y + f.p0 * std::sin(2.0 * M_PI * f.period * (p.x + 1.0) / 2.0)};
    case WarpFamily::Kind::kSlant:
      return {p.x + f.p0 * p.y, p.y};
    case WarpFamily::Kind::kPerspective: {
      const Eigen::Vector3d q = *homography * Eigen::Vector3d(p.x, p.y, 1.0);
      return {q(0) / q(2), q(1) / q(2)};
    }
  }
  throw InvalidArgumentError("bad family kind");
}

}  // namespace

FiducialSet displace_band_fiducials(const FiducialSet& band,
                                    const WarpFamily& family) {
  family.validate();
  Eigen::Matrix3d homography;
  if (family.kind == WarpFamily::Kind::kPerspective) {
    homography = perspective_homography(family.p0);
  }
  FiducialSet out;
  out.points.reserve(band.K());
  for (const Point2& p : band.points) {
    out.points.push_back(apply_family(p, family, &homography));
  }
  // Rescale about the centroid so every coordinate stays inside the frame.
  double cx = 0.0, cy = 0.0, extent = 0.0;
  for (const Point2& p : out.points) {
    cx += p.x;
    cy += p.y;
  }
  cx /= out.K();
  cy /= out.K();
  for (const Point2& p : out.points) {
    extent = std::max({extent, std::abs(p.x - cx), std::abs(p.y - cy)});
  }
  const double limit = kFrameLimit - std::max(std::abs(cx), std::abs(cy));
  if (extent > limit && limit > 0.0) {
    const double s = limit / extent;
    for (Point2& p : out.points) {
      p = {cx + (p.x - cx) * s, cy + (p.y - cy) * s};
    }
  }
  return out;
}

namespace {

struct Blob {
  double cx, cy, rx, ry;
};

double blob_field(const std::vector<Blob>& blobs, double x, double y) {
  double field = 0.0;
  for (const Blob& b : blobs) {
    const double dx = (x - b.cx) / b.rx;
    const double dy = (y - b.cy) / b.ry;
    const double d = std::sqrt(dx * dx + dy * dy);
    const double t = std::clamp((1.2 - d) / 0.4, 0.0, 1.0);
    field = std::max(field, t * t * (3.0 - 2.0 * t));
  }
  return field;
}

FiducialSet band_fiducial_set(int K) {
  FiducialSet band;
  const int half = K / 2;
  band.points.reserve(K);
  for (int row = 0; row < 2; ++row) {
    const double y = row == 0 ? -kBandHalfHeight : kBandHalfHeight;
    for (int i = 0; i < half; ++i) {
      const double x =
          -kFiducialXExtent + 2.0 * kFiducialXExtent * i / (half - 1);
      band.points.push_back({x, y});
    }
  }
  return band;
}

}  // namespace

RibbonSample gen_ribbon(std::uint64_t seed, const WarpFamily& family, int K,
                        int height, int width) {
  family.validate();
  if (K < 4 || K % 2 != 0) {
    throw InvalidArgumentError("K must be even and >= 4");
  }

  CounterRng rng(seed, 0);
  const int blob_count = 8 + rng.uniform_int(0, 2);
  std::vector<Blob> blobs;
  blobs.reserve(blob_count);
  for (int i = 0; i < blob_count; ++i) {
    Blob b;
    const double slot = -kBlobXExtent + 2.0 * kBlobXExtent * i / (blob_count - 1);
    b.cx = slot + rng.uniform(-0.02, 0.02);
    b.cy = rng.uniform(-0.01, 0.01);
    b.rx = rng.uniform(0.045, 0.075);
    // Blob tips graze (and marginally overshoot) the band half-height, so the
    // ribbon's ink contour traces the fiducial band itself; contour-based
    // localizers then share a fixed point with the ground-truth fiducials.
    b.ry = rng.uniform(1.00, 1.02) * kBandHalfHeight;
    blobs.push_back(b);
  }

  constexpr double kBackground = 0.1;
  constexpr double kForeground = 0.9;
  Image clean(height, width, 1);
  Image clean_mask(height, width, 1);
  CounterRng noise(seed, 1);
  for (int r = 0; r < height; ++r) {
    const double y = pixel_to_norm(r, height);
    for (int c = 0; c < width; ++c) {
      const double x = pixel_to_norm(c, width);
      const double f = blob_field(blobs, x, y);
      const double n = noise.uniform(-0.01, 0.01);
      clean.at(r, c) =
          std::clamp(kBackground + (kForeground - kBackground) * f + n, 0.0, 1.0);
      clean_mask.at(r, c) = f >= 0.5 ? 1.0 : 0.0;
    }
  }

  RibbonSample sample;
  sample.seed = seed;
  sample.family = family;
  sample.clean_image = clean;
  sample.band_fiducials = band_fiducial_set(K);
  sample.gt_fiducials = displace_band_fiducials(sample.band_fiducials, family);

  // The distorted image is the exact inverse of the rectifying transform
  // (band fiducials to displaced fiducials): each distorted pixel Newton-
  // inverts that transform to find its clean-frame source. Rectifying the
  // distorted image with the same transform then reproduces the clean ribbon
  // up to double interpolation, for every family. The forward-fit TPS in the
  // other direction is only an approximate inverse and serves as a fallback
  // where Newton fails to converge.
  const TpsTransform rectifying =
      estimate_tps(sample.band_fiducials, sample.gt_fiducials);
  const TpsTransform approx_inverse =
      estimate_tps(sample.gt_fiducials, sample.band_fiducials);
  SampleGrid grid;
  grid.height = height;
  grid.width = width;
  grid.coords.resize(static_cast<std::size_t>(height) * width);
  for (int r = 0; r < height; ++r) {
    Point2 guess = map_point(
        approx_inverse, {pixel_to_norm(0, width), pixel_to_norm(r, height)});
    for (int c = 0; c < width; ++c) {
      const Point2 q{pixel_to_norm(c, width), pixel_to_norm(r, height)};
      try {
        guess = invert_map(rectifying, q, guess);
      } catch (const NoConvergenceError&) {
        guess = map_point(approx_inverse, q);
      }
      grid.at(r, c) = guess;
    }
  }
  sample.image = bilinear_sample(clean, grid);
  Image warped_mask = bilinear_sample(clean_mask, grid);
  sample.gt_mask = Image(height, width, 1);
  for (std::size_t i = 0; i < warped_mask.data.size(); ++i) {
    sample.gt_mask.data[i] = warped_mask.data[i] >= 0.5 ? 1.0 : 0.0;
  }
  return sample;
}

namespace {

WarpFamily sample_family(CounterRng& rng, const FamilyMix& mix,
                         const ParamRanges& ranges) {
  const double weights[4] = {mix.curve, mix.perspective, mix.sine, mix.slant};
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw InvalidArgumentError("family weights must be >= 0");
    total += w;
  }
  if (total <= 0.0) throw InvalidArgumentError("family weights are all zero");

  const double u = rng.next_unit() * total;
  double acc = 0.0;
  int pick = 3;
  for (int i = 0; i < 4; ++i) {
    acc += weights[i];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  WarpFamily f;
  switch (pick) {
    case 0:
      f.kind = WarpFamily::Kind::kCurve;
      f.p0 = rng.uniform(ranges.kappa_min, ranges.kappa_max);
      break;
    case 1:
      f.kind = WarpFamily::Kind::kPerspective;
      f.p0 = rng.uniform(ranges.perspective_min, ranges.perspective_max);
      break;
    case 2:
      f.kind = WarpFamily::Kind::kSine;
      f.p0 = rng.uniform(ranges.sine_amp_min, ranges.sine_amp_max);
      f.period = rng.uniform_int(1, 2);
      break;
    default:
      f.kind = WarpFamily::Kind::kSlant;
      f.p0 = rng.uniform(ranges.slant_min, ranges.slant_max);
      break;
  }
  return f;
}

nlohmann::json family_json(const WarpFamily& f) {
  nlohmann::json params;
  switch (f.kind) {
    case WarpFamily::Kind::kCurve: params["kappa"] = f.p0; break;
    case WarpFamily::Kind::kPerspective: params["displacement"] = f.p0; break;
    case WarpFamily::Kind::kSine:
      params["amplitude"] = f.p0;
      params["period"] = f.period;
      break;
    case WarpFamily::Kind::kSlant: params["shear"] = f.p0; break;
  }
  return {{"kind", family_kind_name(f.kind)}, {"params", params}};
}

WarpFamily family_from_json(const nlohmann::json& j) {
  WarpFamily f;
  f.kind = family_kind_from_name(j.at("kind").get<std::string>());
  const nlohmann::json& params = j.at("params");
  switch (f.kind) {
    case WarpFamily::Kind::kCurve: f.p0 = params.at("kappa"); break;
    case WarpFamily::Kind::kPerspective: f.p0 = params.at("displacement"); break;
    case WarpFamily::Kind::kSine:
      f.p0 = params.at("amplitude");
      f.period = params.at("period");
      break;
    case WarpFamily::Kind::kSlant: f.p0 = params.at("shear"); break;
  }
  return f;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out << content;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

CorpusManifest gen_corpus(std::uint64_t seed, int n, const FamilyMix& mix,
                          const std::string& out_dir, int K, int height,
                          int width, const ParamRanges& ranges) {
  if (n < 1) throw InvalidArgumentError("corpus size must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());

  CorpusManifest manifest;
  manifest.seed = seed;
  manifest.generator_version = kGeneratorVersion;

  for (int i = 0; i < n; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const std::uint64_t sample_seed = rng.next_u64();
    const WarpFamily family = sample_family(rng, mix, ranges);
    const RibbonSample sample = gen_ribbon(sample_seed, family, K, height, width);

    char stem[32];
    std::snprintf(stem, sizeof(stem), "sample_%05d", i);
    const std::filesystem::path dir(out_dir);
    const std::string image_file = std::string(stem) + ".png";
    const std::string mask_file = std::string(stem) + ".mask.png";
    const std::string sidecar_file = std::string(stem) + ".json";
    try {
      write_png((dir / image_file).string(), sample.image);
      write_png((dir / mask_file).string(), sample.gt_mask);
    } catch (const IoError& e) {
      throw IoError(std::string(e.what()) + " (while writing corpus sample)");
    }

    nlohmann::json sidecar;
    sidecar["seed"] = sample_seed;
    sidecar["family"] = family_json(family);
    sidecar["K"] = K;
    sidecar["size"] = {height, width};
    nlohmann::json pts = nlohmann::json::array();
    for (const Point2& p : sample.gt_fiducials.points) {
      pts.push_back({p.x, p.y});
    }
    sidecar["gt_fiducials"] = std::move(pts);
    sidecar["mask_file"] = mask_file;
    sidecar["generator_version"] = kGeneratorVersion;
    write_text_atomic(dir / sidecar_file, sidecar.dump(2) + "\n");
    manifest.sidecars.push_back(sidecar_file);
  }

  nlohmann::json mj;
  mj["seed"] = seed;
  mj["generator_version"] = kGeneratorVersion;
  mj["samples"] = manifest.sidecars;
  const std::filesystem::path manifest_path =
      std::filesystem::path(out_dir) / "manifest.json";
  write_text_atomic(manifest_path, mj.dump(2) + "\n");
  manifest.path = manifest_path.string();
  return manifest;
}

CorpusManifest load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest: " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + manifest_path + ": " + e.what());
  }
  CorpusManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.generator_version = j.at("generator_version").get<std::string>();
  m.sidecars = j.at("samples").get<std::vector<std::string>>();
  m.path = manifest_path;
  return m;
}

RibbonSample load_sample(const std::string& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw IoError("cannot open sidecar: " + sidecar_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar " + sidecar_path + ": " + e.what());
  }
  RibbonSample s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.family = family_from_json(j.at("family"));
  for (const auto& p : j.at("gt_fiducials")) {
    s.gt_fiducials.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  const std::filesystem::path dir =
      std::filesystem::path(sidecar_path).parent_path();
  std::filesystem::path image_path = sidecar_path;
  image_path.replace_extension(".png");
  s.image = read_png(image_path.string());
  s.gt_mask = read_png((dir / j.at("mask_file").get<std::string>()).string());
  for (double& v : s.gt_mask.data) v = v >= 0.5 ? 1.0 : 0.0;
  return s;
}

}  // namespace rcn
