#include <benchmark/benchmark.h>

#include "rcn/calibration.hpp"
#include "rcn/geometry.hpp"
#include "rcn/localizers.hpp"
#include "rcn/rng.hpp"
#include "rcn/sampler.hpp"
#include "rcn/synth.hpp"

using namespace rcn;

namespace {

FiducialSet random_fiducials(int K, double amplitude, CounterRng& rng) {
  const FiducialSet base = base_fiducials(K, 0.0);
  for (;;) {
    FiducialSet out = base;
    for (Point2& p : out.points) {
      p.x += rng.uniform(-amplitude, amplitude);
      p.y += rng.uniform(-amplitude, amplitude);
    }
    if (out.is_valid()) return out;
  }
}

void BM_EstimateTps(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  CounterRng rng(1, 0);
  const FiducialSet c = base_fiducials(K, 0.0);
  const FiducialSet target = random_fiducials(K, 0.2, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_tps(c, target));
  }
}
BENCHMARK(BM_EstimateTps)->Arg(8)->Arg(20)->Arg(64);

void BM_Warp(benchmark::State& state) {
  CounterRng rng(2, 0);
  Image img(64, 256, 1);
  for (double& v : img.data) v = rng.next_unit();
  const FiducialSet c = base_fiducials(20, 0.0);
  const TpsTransform t = estimate_tps(c, random_fiducials(20, 0.2, rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(warp(img, t, 64, 256));
  }
}
BENCHMARK(BM_Warp);

void BM_FiducialGradient(benchmark::State& state) {
  CounterRng rng(3, 0);
  Image img(64, 256, 1);
  for (double& v : img.data) v = rng.next_unit();
  img = gaussian_blur(img, 2.0);
  const FiducialSet c = base_fiducials(20, 0.0);
  const FiducialSet target = random_fiducials(20, 0.15, rng);
  Image adjoint(32, 100, 1, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        loss_grad_wrt_fiducials(img, c, target, 32, 100, adjoint));
  }
}
BENCHMARK(BM_FiducialGradient);

void BM_InvertMap(benchmark::State& state) {
  CounterRng rng(4, 0);
  const FiducialSet c = base_fiducials(20, 0.0);
  const TpsTransform t = estimate_tps(c, random_fiducials(20, 0.25, rng));
  Point2 p{0.3, -0.2};
  for (auto _ : state) {
    benchmark::DoNotOptimize(invert_map(t, map_point(t, p)));
  }
}
BENCHMARK(BM_InvertMap);

void BM_CalibrateHeuristic(benchmark::State& state) {
  WarpFamily family;
  family.kind = WarpFamily::Kind::kCurve;
  family.p0 = 0.3;
  const RibbonSample sample = gen_ribbon(1, family);
  const HeuristicLocalizer heuristic;
  CalibrationConfig config;
  config.iterations = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(calibrate(sample.image, heuristic, config));
  }
}
BENCHMARK(BM_CalibrateHeuristic)->Arg(1)->Arg(3);

void BM_GenRibbon(benchmark::State& state) {
  WarpFamily family;
  family.kind = WarpFamily::Kind::kSine;
  family.p0 = 0.2;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_ribbon(seed++, family));
  }
}
BENCHMARK(BM_GenRibbon);

}  // namespace

BENCHMARK_MAIN();
