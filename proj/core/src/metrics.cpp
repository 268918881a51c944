#include "rcn/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "rcn/errors.hpp"
#include "rcn/localizers.hpp"
#include "rcn/sampler.hpp"

namespace rcn {

double fiducial_rmse(const FiducialSet& a, const FiducialSet& b) {
  if (a.K() != b.K()) {
    throw ShapeMismatchError("fiducial count mismatch in RMSE");
  }
  double acc = 0.0;
  for (int j = 0; j < a.K(); ++j) {
    const Point2 d = a.points[j] - b.points[j];
    acc += d.x * d.x + d.y * d.y;
  }
  return std::sqrt(acc / a.K());
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw ShapeMismatchError("image shape mismatch in PSNR");
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse < 1e-10) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

TpsTransform gt_rectifying_transform(const RibbonSample& sample, int K,
                                     double margin) {
  return estimate_tps(base_fiducials(K, margin), sample.gt_fiducials);
}

namespace {

Image binarize(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = v >= 0.5 ? 1.0 : 0.0;
  return out;
}

}  // namespace

double mask_coverage(const CalibrationTrace& trace,
                     const RibbonSample& sample) {
  const CalibrationConfig& cfg = trace.config;
  const TpsTransform gt_t = gt_rectifying_transform(sample, cfg.K, cfg.margin);
  const Image reference =
      binarize(warp(sample.gt_mask, gt_t, cfg.final_h, cfg.final_w));

  Image recovered;
  if (cfg.mode == Mode::kFpRefine) {
    recovered = warp(sample.gt_mask, trace.steps.back().transform, cfg.final_h,
                     cfg.final_w);
  } else {
    recovered = sample.gt_mask;
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      const bool last = t + 1 == trace.steps.size();
      recovered = warp(recovered, trace.steps[t].transform,
                       last ? cfg.final_h : cfg.intermediate_h,
                       last ? cfg.final_w : cfg.intermediate_w);
    }
  }
  recovered = binarize(recovered);

  double ref_count = 0.0, hit_count = 0.0;
  for (std::size_t i = 0; i < reference.data.size(); ++i) {
    if (reference.data[i] > 0.5) {
      ref_count += 1.0;
      if (recovered.data[i] > 0.5) hit_count += 1.0;
    }
  }
  if (ref_count == 0.0) return 1.0;
  return hit_count / ref_count;
}

std::string LocalizerSpec::to_string() const {
  char buf[128];
  if (kind == "oracle") {
    std::snprintf(buf, sizeof(buf), "oracle:alpha=%g", alpha);
  } else if (kind == "crop-oracle") {
    std::snprintf(buf, sizeof(buf), "crop-oracle:frac=%g", crop);
  } else if (kind == "descent") {
    std::snprintf(buf, sizeof(buf), "descent:steps=%d,step_size=%g",
                  descent_steps, descent_step_size);
  } else {
    return kind;
  }
  return buf;
}

LocalizerSpec parse_localizer_spec(const std::string& text) {
  LocalizerSpec spec;
  const std::size_t colon = text.find(':');
  spec.kind = text.substr(0, colon);
  if (spec.kind != "oracle" && spec.kind != "heuristic" &&
      spec.kind != "descent" && spec.kind != "crop-oracle") {
    throw InvalidArgumentError("unknown localizer kind: " + spec.kind);
  }
  if (colon == std::string::npos) return spec;

  std::string rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    const std::string item = rest.substr(0, comma);
    rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgumentError("bad localizer option: " + item);
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "alpha") {
        spec.alpha = std::stod(value);
      } else if (key == "frac") {
        spec.crop = std::stod(value);
      } else if (key == "steps") {
        spec.descent_steps = std::stoi(value);
      } else if (key == "step_size") {
        spec.descent_step_size = std::stod(value);
      } else {
        throw InvalidArgumentError("unknown localizer option: " + key);
      }
    } catch (const std::logic_error&) {
      throw InvalidArgumentError("bad value for localizer option " + key +
                                 ": " + value);
    }
  }
  return spec;
}

std::unique_ptr<Localizer> make_localizer(const LocalizerSpec& spec,
                                          const RibbonSample& sample,
                                          const CalibrationConfig& config) {
  if (spec.kind == "heuristic") {
    return std::make_unique<HeuristicLocalizer>();
  }
  if (spec.kind == "oracle") {
    OracleConfig cfg;
    cfg.gt_fiducials = sample.gt_fiducials;
    cfg.alpha = spec.alpha;
    return std::make_unique<OracleLocalizer>(std::move(cfg));
  }
  if (spec.kind == "crop-oracle") {
    return std::make_unique<CropBiasedLocalizer>(sample.gt_fiducials, spec.crop);
  }
  if (spec.kind == "descent") {
    // Evaluation-harness choice: the descent target is the gt-rectified
    // sample at localizer-input scale.
    const TpsTransform gt_t =
        gt_rectifying_transform(sample, config.K, config.margin);
    DescentConfig cfg;
    cfg.template_image =
        warp(sample.image, gt_t, config.localizer_input_h,
             config.localizer_input_w);
    cfg.steps = spec.descent_steps;
    cfg.step_size = spec.descent_step_size;
    return std::make_unique<DescentLocalizer>(std::move(cfg));
  }
  throw InvalidArgumentError("unknown localizer kind: " + spec.kind);
}

SampleReport eval_sample(const RibbonSample& sample, int index,
                         const LocalizerSpec& spec,
                         const CalibrationConfig& config) {
  SampleReport report;
  report.sample_index = index;
  report.mode = mode_name(config.mode);
  report.iterations = config.iterations;
  try {
    const std::unique_ptr<Localizer> localizer =
        make_localizer(spec, sample, config);
    const CalibrationTrace trace = calibrate(sample.image, *localizer, config);
    const TpsTransform gt_t =
        gt_rectifying_transform(sample, config.K, config.margin);
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      const CalibrationStep& step = trace.steps[t];
      report.rmse_per_iter.push_back(
          fiducial_rmse(step.fiducials_ori, sample.gt_fiducials));
      const Image reference = warp(sample.image, gt_t, step.output.height,
                                   step.output.width);
      report.psnr_per_iter.push_back(psnr(step.output, reference));
    }
    report.coverage = mask_coverage(trace, sample);
  } catch (const Error& e) {
    report.failed = true;
    report.error = e.what();
  }
  return report;
}

namespace {

void aggregate(ReportRow& row) {
  std::vector<double> rmse, psnr_v, cov;
  for (const SampleReport& s : row.samples) {
    if (s.failed) {
      ++row.failures;
      continue;
    }
    rmse.push_back(s.rmse_per_iter.back());
    psnr_v.push_back(s.psnr_per_iter.back());
    cov.push_back(s.coverage);
  }
  row.n = static_cast<int>(rmse.size());
  const auto mean_std = [](const std::vector<double>& v) {
    if (v.empty()) return std::pair<double, double>{0.0, 0.0};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= static_cast<double>(v.size());  // population std
    return std::pair<double, double>{m, std::sqrt(var)};
  };
  std::tie(row.rmse_mean, row.rmse_std) = mean_std(rmse);
  std::tie(row.psnr_mean, row.psnr_std) = mean_std(psnr_v);
  std::tie(row.coverage_mean, row.coverage_std) = mean_std(cov);
}

}  // namespace

CorpusReport eval_corpus(const CorpusManifest& manifest,
                         const LocalizerSpec& spec,
                         const std::vector<std::pair<Mode, int>>& configs,
                         const CalibrationConfig& base_config, int jobs) {
  const std::filesystem::path dir =
      std::filesystem::path(manifest.path).parent_path();
  std::vector<RibbonSample> samples;
  samples.reserve(manifest.sidecars.size());
  for (const std::string& sidecar : manifest.sidecars) {
    samples.push_back(load_sample((dir / sidecar).string()));
  }

  CorpusReport report;
  report.manifest_path = manifest.path;
  report.localizer = spec.to_string();

  for (const auto& [mode, iterations] : configs) {
    CalibrationConfig config = base_config;
    config.mode = mode;
    config.iterations = iterations;

    ReportRow row;
    row.mode = mode_name(mode);
    row.iterations = iterations;
    row.samples.resize(samples.size());

    const int workers =
        std::max(1, std::min<int>(jobs, static_cast<int>(samples.size())));
    if (workers == 1) {
      for (std::size_t i = 0; i < samples.size(); ++i) {
        row.samples[i] =
            eval_sample(samples[i], static_cast<int>(i), spec, config);
      }
    } else {
      std::vector<std::thread> pool;
      std::atomic<std::size_t> next{0};
      for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
          for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= samples.size()) return;
            row.samples[i] =
                eval_sample(samples[i], static_cast<int>(i), spec, config);
          }
        });
      }
      for (std::thread& t : pool) t.join();
    }
    aggregate(row);
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string report_csv(const CorpusReport& report) {
  std::string out =
      "mode,iters,n,rmse_mean,rmse_std,psnr_mean,psnr_std,"
      "coverage_mean,coverage_std,failures\n";
  for (const ReportRow& row : report.rows) {
    out += row.mode + "," + std::to_string(row.iterations) + "," +
           std::to_string(row.n) + "," + fmt(row.rmse_mean) + "," +
           fmt(row.rmse_std) + "," + fmt(row.psnr_mean) + "," +
           fmt(row.psnr_std) + "," + fmt(row.coverage_mean) + "," +
           fmt(row.coverage_std) + "," + std::to_string(row.failures) + "\n";
  }
  return out;
}

std::string report_json(const CorpusReport& report) {
  nlohmann::json j;
  j["manifest"] = report.manifest_path;
  j["localizer"] = report.localizer;
  nlohmann::json rows = nlohmann::json::array();
  for (const ReportRow& row : report.rows) {
    nlohmann::json r;
    r["mode"] = row.mode;
    r["iters"] = row.iterations;
    r["n"] = row.n;
    r["rmse_mean"] = row.rmse_mean;
    r["rmse_std"] = row.rmse_std;
    r["psnr_mean"] = row.psnr_mean;
    r["psnr_std"] = row.psnr_std;
    r["coverage_mean"] = row.coverage_mean;
    r["coverage_std"] = row.coverage_std;
    r["failures"] = row.failures;
    nlohmann::json samples = nlohmann::json::array();
    for (const SampleReport& s : row.samples) {
      nlohmann::json sj;
      sj["index"] = s.sample_index;
      sj["mode"] = s.mode;
      sj["iters"] = s.iterations;
      sj["rmse"] = s.rmse_per_iter;
      sj["psnr"] = s.psnr_per_iter;
      sj["coverage"] = s.coverage;
      sj["failed"] = s.failed;
      if (s.failed) sj["error"] = s.error;
      samples.push_back(std::move(sj));
    }
    r["samples"] = std::move(samples);
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

}  // namespace rcn
