#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rcn/errors.hpp"
#include "rcn/metrics.hpp"
#include "rcn/rng.hpp"
#include "rcn/sampler.hpp"
#include "rcn/synth.hpp"

using namespace rcn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("rcn_test_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

WarpFamily make_family(WarpFamily::Kind kind, double p0, int period = 1) {
  WarpFamily f;
  f.kind = kind;
  f.p0 = p0;
  f.period = period;
  return f;
}

}  // namespace

TEST_CASE("zero-parameter families leave the band fiducials untouched") {
  for (WarpFamily::Kind kind :
       {WarpFamily::Kind::kCurve, WarpFamily::Kind::kPerspective,
        WarpFamily::Kind::kSine, WarpFamily::Kind::kSlant}) {
    const RibbonSample sample = gen_ribbon(5, make_family(kind, 0.0));
    REQUIRE(sample.band_fiducials.K() == 20);
    for (int j = 0; j < 20; ++j) {
      CHECK(distance(sample.gt_fiducials.points[j],
                     sample.band_fiducials.points[j]) < 1e-9);
    }
    // With an identity displacement, the distorted image is an identity
    // resample of the clean one.
    double worst = 0.0;
    for (std::size_t i = 0; i < sample.image.data.size(); ++i) {
      worst = std::max(worst,
                       std::abs(sample.image.data[i] - sample.clean_image.data[i]));
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  const WarpFamily family = make_family(WarpFamily::Kind::kSine, 0.2, 2);
  const RibbonSample a = gen_ribbon(123, family);
  const RibbonSample b = gen_ribbon(123, family);
  CHECK(a.image.data == b.image.data);
  CHECK(a.gt_mask.data == b.gt_mask.data);
  for (int j = 0; j < 20; ++j) {
    CHECK(distance(a.gt_fiducials.points[j], b.gt_fiducials.points[j]) == 0.0);
  }
  const RibbonSample c = gen_ribbon(124, family);
  CHECK(a.image.data != c.image.data);
}

TEST_CASE("gt fiducials rectify every family to near the clean image") {
  const std::vector<WarpFamily> families = {
      make_family(WarpFamily::Kind::kCurve, 0.35),
      make_family(WarpFamily::Kind::kCurve, -0.3),
      make_family(WarpFamily::Kind::kPerspective, 0.25),
      make_family(WarpFamily::Kind::kSine, 0.25, 1),
      make_family(WarpFamily::Kind::kSine, 0.2, 2),
      make_family(WarpFamily::Kind::kSlant, 0.4),
  };
  for (const WarpFamily& family : families) {
    CAPTURE(family_kind_name(family.kind));
    const RibbonSample sample = gen_ribbon(17, family);
    // Inverse warp: map the distorted image back to the clean frame through
    // the band-to-ground-truth transform; only double-interpolation loss and
    // border padding should remain.
    const Image recovered =
        warp(sample.image,
             estimate_tps(sample.band_fiducials, sample.gt_fiducials),
             sample.image.height, sample.image.width);
    Image ref_in(56, 244, 1), got_in(56, 244, 1);
    for (int r = 0; r < 56; ++r) {
      for (int c = 0; c < 244; ++c) {
        ref_in.at(r, c) = sample.clean_image.at(r + 4, c + 6);
        got_in.at(r, c) = recovered.at(r + 4, c + 6);
      }
    }
    CHECK(psnr(got_in, ref_in) >= 28.0);
  }
}

TEST_CASE("mask and image foreground agree") {
  const RibbonSample sample =
      gen_ribbon(33, make_family(WarpFamily::Kind::kCurve, 0.3));
  // Pixels the mask marks as foreground should be bright, background dark;
  // allow a small disagreement budget at anti-aliased edges.
  int checked = 0, agreed = 0;
  for (std::size_t i = 0; i < sample.image.data.size(); ++i) {
    const bool fg = sample.gt_mask.data[i] > 0.5;
    const double v = sample.image.data[i];
    if (std::abs(v - 0.5) < 0.25) continue;  // skip ambiguous edge pixels
    ++checked;
    if (fg == (v > 0.5)) ++agreed;
  }
  REQUIRE(checked > 1000);
  CHECK(static_cast<double>(agreed) / checked >= 0.99);
}

TEST_CASE("displaced fiducials stay inside the frame limit") {
  CounterRng rng(55, 0);
  const FiducialSet band = gen_ribbon(1, make_family(WarpFamily::Kind::kCurve, 0.0))
                               .band_fiducials;
  for (int rep = 0; rep < 40; ++rep) {
    WarpFamily family;
    const int pick = rep % 4;
    if (pick == 0) family = make_family(WarpFamily::Kind::kCurve, rng.uniform(-0.5, 0.5));
    if (pick == 1) family = make_family(WarpFamily::Kind::kPerspective, rng.uniform(0.0, 0.3));
    if (pick == 2) family = make_family(WarpFamily::Kind::kSine, rng.uniform(0.0, 0.3), 1 + rep % 2);
    if (pick == 3) family = make_family(WarpFamily::Kind::kSlant, rng.uniform(-0.5, 0.5));
    const FiducialSet displaced = displace_band_fiducials(band, family);
    for (const Point2& p : displaced.points) {
      CHECK(std::abs(p.x) <= 0.98 + 1e-9);
      CHECK(std::abs(p.y) <= 0.98 + 1e-9);
    }
  }
}

TEST_CASE("family validation rejects out-of-range parameters") {
  CHECK_THROWS_AS(make_family(WarpFamily::Kind::kCurve, 0.6).validate(),
                  InvalidArgumentError);
  CHECK_THROWS_AS(make_family(WarpFamily::Kind::kPerspective, -0.1).validate(),
                  InvalidArgumentError);
  CHECK_THROWS_AS(make_family(WarpFamily::Kind::kSine, 0.2, 3).validate(),
                  InvalidArgumentError);
  CHECK_THROWS_AS(make_family(WarpFamily::Kind::kSlant, 0.7).validate(),
                  InvalidArgumentError);
  CHECK_NOTHROW(make_family(WarpFamily::Kind::kSine, 0.3, 2).validate());
}

TEST_CASE("family kind names round trip") {
  for (WarpFamily::Kind kind :
       {WarpFamily::Kind::kCurve, WarpFamily::Kind::kPerspective,
        WarpFamily::Kind::kSine, WarpFamily::Kind::kSlant}) {
    CHECK(family_kind_from_name(family_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(family_kind_from_name("spiral"), InvalidArgumentError);
}

TEST_CASE("gen_corpus writes n samples and a manifest") {
  TempDir dir;
  FamilyMix mix;
  const CorpusManifest manifest = gen_corpus(7, 6, mix, dir.path.string());
  CHECK(manifest.seed == 7);
  CHECK(manifest.generator_version == kGeneratorVersion);
  REQUIRE(manifest.sidecars.size() == 6);
  for (const std::string& sidecar : manifest.sidecars) {
    CHECK(fs::exists(dir.path / sidecar));
  }
  CHECK(fs::exists(dir.path / "manifest.json"));

  const CorpusManifest loaded =
      load_manifest((dir.path / "manifest.json").string());
  CHECK(loaded.seed == 7);
  CHECK(loaded.sidecars == manifest.sidecars);
}

TEST_CASE("single-family mix produces only that family") {
  TempDir dir;
  FamilyMix mix;
  mix.curve = 0.0;
  mix.perspective = 0.0;
  mix.sine = 1.0;
  mix.slant = 0.0;
  const CorpusManifest manifest = gen_corpus(9, 4, mix, dir.path.string());
  for (const std::string& sidecar : manifest.sidecars) {
    const RibbonSample sample = load_sample((dir.path / sidecar).string());
    CHECK(sample.family.kind == WarpFamily::Kind::kSine);
  }
}

TEST_CASE("gen_corpus rejects degenerate mixes and counts") {
  TempDir dir;
  FamilyMix zero;
  zero.curve = zero.perspective = zero.sine = zero.slant = 0.0;
  CHECK_THROWS_AS(gen_corpus(1, 2, zero, dir.path.string()),
                  InvalidArgumentError);
  FamilyMix negative;
  negative.curve = -1.0;
  CHECK_THROWS_AS(gen_corpus(1, 2, negative, dir.path.string()),
                  InvalidArgumentError);
  CHECK_THROWS_AS(gen_corpus(1, 0, FamilyMix{}, dir.path.string()),
                  InvalidArgumentError);
}

TEST_CASE("load_sample round trips the sidecar contents") {
  TempDir dir;
  const CorpusManifest manifest = gen_corpus(21, 2, FamilyMix{}, dir.path.string());
  // Regenerate the same sample directly and compare with the reloaded one.
  const RibbonSample loaded =
      load_sample((dir.path / manifest.sidecars[0]).string());
  const RibbonSample fresh = gen_ribbon(loaded.seed, loaded.family);
  REQUIRE(loaded.gt_fiducials.K() == 20);
  for (int j = 0; j < 20; ++j) {
    CHECK(distance(loaded.gt_fiducials.points[j],
                   fresh.gt_fiducials.points[j]) < 1e-12);
  }
  CHECK(loaded.image.height == fresh.image.height);
  CHECK(loaded.image.width == fresh.image.width);
  // PNG storage quantizes to 8 bits.
  double worst = 0.0;
  for (std::size_t i = 0; i < loaded.image.data.size(); ++i) {
    worst = std::max(worst, std::abs(loaded.image.data[i] - fresh.image.data[i]));
  }
  CHECK(worst <= 0.5 / 255.0 + 1e-9);
  for (std::size_t i = 0; i < loaded.gt_mask.data.size(); ++i) {
    CHECK((loaded.gt_mask.data[i] == 0.0 || loaded.gt_mask.data[i] == 1.0));
  }
}

TEST_CASE("corpus regeneration is byte-identical") {
  TempDir a, b;
  gen_corpus(77, 3, FamilyMix{}, a.path.string());
  gen_corpus(77, 3, FamilyMix{}, b.path.string());
  for (const auto& entry : fs::directory_iterator(a.path)) {
    const fs::path other = b.path / entry.path().filename();
    REQUIRE(fs::exists(other));
    std::ifstream fa(entry.path(), std::ios::binary);
    std::ifstream fb(other, std::ios::binary);
    const std::string da((std::istreambuf_iterator<char>(fa)), {});
    const std::string db((std::istreambuf_iterator<char>(fb)), {});
    CHECK(da == db);
  }
}
