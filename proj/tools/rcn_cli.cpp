// Command-line front end: corpus generation, single-image calibration,
// corpus evaluation, trace visualization, and one-shot TPS warps.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "rcn/calibration.hpp"
#include "rcn/errors.hpp"
#include "rcn/localizers.hpp"
#include "rcn/metrics.hpp"
#include "rcn/png_io.hpp"
#include "rcn/sampler.hpp"
#include "rcn/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class LogLevel { kError = 0, kWarn, kInfo, kDebug };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("RCN_LOG");
    if (!env) return LogLevel::kWarn;
    const std::string v(env);
    if (v == "error") return LogLevel::kError;
    if (v == "warn") return LogLevel::kWarn;
    if (v == "info") return LogLevel::kInfo;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kWarn;
  }();
  return level;
}

void log_msg(LogLevel lvl, const std::string& msg) {
  if (lvl > log_level()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(lvl)], msg.c_str());
}

// JSON config files mirror the flags of one subcommand. CLI11 does not read
// config files attached to subcommands, so --config is an ordinary option:
// the JSON object is expanded into equivalent flags spliced in ahead of the
// explicit ones, and explicit flags win through last-value precedence.
void add_config_option(CLI::App* cmd) {
  static std::string sink;
  cmd->add_option("--config", sink,
                  "JSON file mirroring the flags (explicit flags win)");
}

std::string json_scalar(const json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string config_path_from(const std::vector<std::string>& args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return "";
}

// Returns {subcommand, config-derived flags..., original flags...}.
std::vector<std::string> expand_config(std::vector<std::string> args,
                                       const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rcn::IoError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw rcn::IoError("malformed config " + path + ": " + e.what());
  }
  if (!j.is_object()) {
    throw rcn::IoError("config root must be a JSON object: " + path);
  }
  std::vector<std::string> expanded;
  expanded.push_back(args.front());
  for (const auto& [key, value] : j.items()) {
    expanded.push_back("--" + key);
    if (value.is_array()) {
      for (const auto& v : value) expanded.push_back(json_scalar(v));
    } else {
      expanded.push_back(json_scalar(value));
    }
  }
  expanded.insert(expanded.end(), args.begin() + 1, args.end());
  return expanded;
}

rcn::FamilyMix parse_family_mix(const std::string& text) {
  rcn::FamilyMix mix{0, 0, 0, 0};
  std::string rest = text;
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    const std::string item = rest.substr(0, comma);
    rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    const std::size_t colon = item.find(':');
    const std::string name = item.substr(0, colon);
    const double weight =
        colon == std::string::npos ? 1.0 : std::stod(item.substr(colon + 1));
    switch (rcn::family_kind_from_name(name)) {
      case rcn::WarpFamily::Kind::kCurve: mix.curve = weight; break;
      case rcn::WarpFamily::Kind::kPerspective: mix.perspective = weight; break;
      case rcn::WarpFamily::Kind::kSine: mix.sine = weight; break;
      case rcn::WarpFamily::Kind::kSlant: mix.slant = weight; break;
    }
  }
  return mix;
}

json fiducials_json(const rcn::FiducialSet& f) {
  json out = json::array();
  for (const rcn::Point2& p : f.points) out.push_back({p.x, p.y});
  return out;
}

rcn::FiducialSet fiducials_from_json(const json& j) {
  rcn::FiducialSet out;
  for (const auto& p : j) {
    out.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return out;
}

// Accepts either a bare [[x,y],...] array or a corpus sidecar object.
rcn::FiducialSet read_fiducials_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rcn::IoError("cannot open fiducial file: " + path);
  json j;
  in >> j;
  if (j.is_array()) return fiducials_from_json(j);
  if (j.contains("gt_fiducials")) return fiducials_from_json(j["gt_fiducials"]);
  throw rcn::IoError("no fiducials found in " + path);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw rcn::IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw rcn::IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  int n = 100;
  std::uint64_t seed = 0;
  std::string families = "curve:1,perspective:1,sine:1,slant:1";
  std::string out;
  int k = 20;
  int height = 64, width = 256;
};

int cmd_gen(const GenArgs& args) {
  const rcn::FamilyMix mix = parse_family_mix(args.families);
  const rcn::CorpusManifest manifest = rcn::gen_corpus(
      args.seed, args.n, mix, args.out, args.k, args.height, args.width);
  std::printf("%s\n", manifest.path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
  std::string input;
  std::string localizer = "heuristic";
  std::string sidecar;   // gt fiducials for oracle kinds
  std::string template_path;  // descent target
  int iters = 3;
  std::string mode = "fp-refine";
  int k = 20;
  double margin = 0.0;
  std::string out_prefix;
};

std::unique_ptr<rcn::Localizer> build_localizer(
    const CalibrateArgs& args, const rcn::CalibrationConfig& config) {
  const rcn::LocalizerSpec spec = rcn::parse_localizer_spec(args.localizer);
  if (spec.kind == "heuristic") {
    return std::make_unique<rcn::HeuristicLocalizer>();
  }
  if (spec.kind == "oracle" || spec.kind == "crop-oracle") {
    std::string sidecar = args.sidecar;
    if (sidecar.empty()) {
      sidecar = fs::path(args.input).replace_extension(".json").string();
    }
    const rcn::FiducialSet gt = read_fiducials_file(sidecar);
    if (spec.kind == "oracle") {
      rcn::OracleConfig cfg;
      cfg.gt_fiducials = gt;
      cfg.alpha = spec.alpha;
      return std::make_unique<rcn::OracleLocalizer>(std::move(cfg));
    }
    return std::make_unique<rcn::CropBiasedLocalizer>(gt, spec.crop);
  }
  if (spec.kind == "descent") {
    if (args.template_path.empty()) {
      throw CLI::ValidationError("--template",
                                 "descent localizer needs a template image");
    }
    rcn::DescentConfig cfg;
    cfg.template_image =
        rcn::downsample_area(rcn::read_png(args.template_path),
                             config.localizer_input_h, config.localizer_input_w);
    cfg.steps = spec.descent_steps;
    cfg.step_size = spec.descent_step_size;
    return std::make_unique<rcn::DescentLocalizer>(std::move(cfg));
  }
  throw CLI::ValidationError("--localizer", "unknown kind " + spec.kind);
}

int cmd_calibrate(const CalibrateArgs& args) {
  rcn::CalibrationConfig config;
  config.iterations = args.iters;
  config.mode = rcn::mode_from_name(args.mode);
  config.K = args.k;
  config.margin = args.margin;
  config.validate();

  const rcn::Image input = rcn::read_png(args.input);
  const std::unique_ptr<rcn::Localizer> localizer =
      build_localizer(args, config);

  const std::string prefix = args.out_prefix.empty()
                                 ? fs::path(args.input).replace_extension("").string()
                                 : args.out_prefix;
  rcn::CalibrationTrace trace;
  try {
    trace = rcn::calibrate(input, *localizer, config);
  } catch (const rcn::DegenerateFiducialsError& e) {
    std::fprintf(stderr, "calibration failed at step %d: %s\n", e.step,
                 e.what());
    return 1;
  }

  json steps = json::array();
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const rcn::CalibrationStep& step = trace.steps[t];
    const bool last = t + 1 == trace.steps.size();
    const std::string file =
        last ? prefix + ".calibrated.png"
             : prefix + ".step" + std::to_string(t + 1) + ".png";
    rcn::write_png(file, step.output);
    json sj;
    sj["offsets"] = step.offsets;
    sj["fiducials_cal"] = fiducials_json(step.fiducials_cal);
    sj["fiducials_ori"] = fiducials_json(step.fiducials_ori);
    sj["output_file"] = fs::path(file).filename().string();
    steps.push_back(std::move(sj));
  }
  json trace_json;
  trace_json["config"] = {{"iterations", config.iterations},
                          {"mode", rcn::mode_name(config.mode)},
                          {"K", config.K},
                          {"margin", config.margin},
                          {"intermediate_size", {config.intermediate_h, config.intermediate_w}},
                          {"final_size", {config.final_h, config.final_w}},
                          {"localizer", args.localizer}};
  trace_json["steps"] = std::move(steps);
  write_text(prefix + ".trace.json", trace_json.dump(2) + "\n");
  log_msg(LogLevel::kInfo, "wrote " + prefix + ".trace.json");
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string manifest;
  std::string localizer = "oracle:alpha=0.5";
  std::string iters = "1,2,3";
  std::string modes = "fp-refine";
  int jobs = 0;
  std::string out_dir;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::string rest = text;
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    out.push_back(std::stoi(rest.substr(0, comma)));
    rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
  }
  return out;
}

int cmd_eval(const EvalArgs& args) {
  const rcn::CorpusManifest manifest = rcn::load_manifest(args.manifest);
  const rcn::LocalizerSpec spec = rcn::parse_localizer_spec(args.localizer);

  std::vector<std::pair<rcn::Mode, int>> configs;
  std::string modes_rest = args.modes;
  while (!modes_rest.empty()) {
    const std::size_t comma = modes_rest.find(',');
    const rcn::Mode mode = rcn::mode_from_name(modes_rest.substr(0, comma));
    modes_rest = comma == std::string::npos ? "" : modes_rest.substr(comma + 1);
    for (int it : parse_int_list(args.iters)) configs.emplace_back(mode, it);
  }

  const int jobs = args.jobs > 0
                       ? args.jobs
                       : static_cast<int>(std::thread::hardware_concurrency());
  const rcn::CorpusReport report =
      rcn::eval_corpus(manifest, spec, configs, {}, std::max(1, jobs));

  const fs::path out_dir = args.out_dir.empty()
                               ? fs::path(args.manifest).parent_path()
                               : fs::path(args.out_dir);
  fs::create_directories(out_dir);
  write_text((out_dir / "report.csv").string(), rcn::report_csv(report));
  write_text((out_dir / "report.json").string(), rcn::report_json(report));
  std::printf("%s\n", (out_dir / "report.csv").string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// viz

struct VizArgs {
  std::string trace;
  std::string input;
  std::string out;
};

struct Rgb {
  double r, g, b;
};
constexpr Rgb kGreen{0.1, 0.9, 0.2};   // previous / canonical points
constexpr Rgb kYellow{1.0, 0.85, 0.1}; // updated points

rcn::Image to_rgb(const rcn::Image& img) {
  rcn::Image out(img.height, img.width, 3);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        out.at(r, c, ch) = img.at(r, c, img.channels == 3 ? ch : 0);
      }
    }
  }
  return out;
}

void put_pixel(rcn::Image& rgb, int r, int c, Rgb color) {
  if (r < 0 || r >= rgb.height || c < 0 || c >= rgb.width) return;
  rgb.at(r, c, 0) = color.r;
  rgb.at(r, c, 1) = color.g;
  rgb.at(r, c, 2) = color.b;
}

void draw_marker(rcn::Image& rgb, rcn::Point2 p, Rgb color) {
  const bool off_frame =
      p.x < -1.0 || p.x > 1.0 || p.y < -1.0 || p.y > 1.0;
  const int c = std::clamp(
      static_cast<int>(std::lround(rcn::norm_to_pixel(p.x, rgb.width))), 0,
      rgb.width - 1);
  const int r = std::clamp(
      static_cast<int>(std::lround(rcn::norm_to_pixel(p.y, rgb.height))), 0,
      rgb.height - 1);
  if (off_frame) {
    // Off-frame glyph: open square clamped to the panel edge.
    for (int i = -2; i <= 2; ++i) {
      put_pixel(rgb, r - 2, c + i, color);
      put_pixel(rgb, r + 2, c + i, color);
      put_pixel(rgb, r + i, c - 2, color);
      put_pixel(rgb, r + i, c + 2, color);
    }
  } else {
    for (int i = -2; i <= 2; ++i) {
      put_pixel(rgb, r, c + i, color);
      put_pixel(rgb, r + i, c, color);
    }
  }
}

rcn::Image hcat(const std::vector<rcn::Image>& panels) {
  int height = 0, width = 0;
  constexpr int kGap = 2;
  for (const rcn::Image& p : panels) {
    height = std::max(height, p.height);
    width += p.width + kGap;
  }
  rcn::Image out(height, width - kGap, 3, 0.0);
  int x = 0;
  for (const rcn::Image& p : panels) {
    for (int r = 0; r < p.height; ++r) {
      for (int c = 0; c < p.width; ++c) {
        for (int ch = 0; ch < 3; ++ch) {
          out.at(r, x + c, ch) = p.at(r, c, ch);
        }
      }
    }
    x += p.width + kGap;
  }
  return out;
}

int cmd_viz(const VizArgs& args) {
  std::ifstream in(args.trace);
  if (!in) throw rcn::IoError("cannot open trace: " + args.trace);
  json trace;
  try {
    in >> trace;
  } catch (const json::exception& e) {
    throw rcn::IoError("malformed trace " + args.trace + ": " + e.what());
  }
  const fs::path trace_dir = fs::path(args.trace).parent_path();

  std::vector<rcn::Image> panels;
  // Original panel, with every step's original-frame fiducials.
  rcn::Image original = to_rgb(rcn::read_png(args.input));
  const json& steps = trace.at("steps");
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const Rgb color = t + 1 == steps.size() ? kYellow : kGreen;
    for (const rcn::Point2& p :
         fiducials_from_json(steps[t].at("fiducials_ori")).points) {
      draw_marker(original, p, color);
    }
  }
  panels.push_back(std::move(original));

  const int k = trace.at("config").at("K").get<int>();
  const double margin = trace.at("config").at("margin").get<double>();
  const rcn::FiducialSet base = rcn::base_fiducials(k, margin);
  for (const json& step : steps) {
    rcn::Image panel = to_rgb(rcn::read_png(
        (trace_dir / step.at("output_file").get<std::string>()).string()));
    for (const rcn::Point2& p : base.points) draw_marker(panel, p, kGreen);
    for (const rcn::Point2& p :
         fiducials_from_json(step.at("fiducials_cal")).points) {
      draw_marker(panel, p, kYellow);
    }
    panels.push_back(std::move(panel));
  }

  const std::string out = args.out.empty()
                              ? fs::path(args.trace).replace_extension(".png").string()
                              : args.out;
  rcn::write_png(out, hcat(panels));
  std::printf("%s\n", out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// warp

struct WarpArgs {
  std::string input;
  std::string fiducials;
  std::string out;
  int k = 20;
  double margin = 0.0;
  int height = 32, width = 100;
};

int cmd_warp(const WarpArgs& args) {
  const rcn::FiducialSet targets = read_fiducials_file(args.fiducials);
  if (targets.K() != args.k) {
    std::fprintf(stderr,
                 "--k is %d but %s holds %d fiducials\n", args.k,
                 args.fiducials.c_str(), targets.K());
    return 2;
  }
  const rcn::Image input = rcn::read_png(args.input);
  const rcn::TpsTransform transform =
      rcn::estimate_tps(rcn::base_fiducials(args.k, args.margin), targets);
  const std::string out =
      args.out.empty()
          ? fs::path(args.input).replace_extension(".warped.png").string()
          : args.out;
  rcn::write_png(out, rcn::warp(input, transform, args.height, args.width));
  std::printf("%s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent TPS calibration toolkit", "rcn"};
  app.require_subcommand(1);
  // Lets an explicit flag override the same flag expanded from --config.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic corpus");
  gen_cmd->add_option("--n", gen.n, "Sample count")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Corpus seed");
  gen_cmd->add_option("--families", gen.families,
                      "Weighted family mix, e.g. curve:1,sine:2");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--k", gen.k, "Fiducial count");
  gen_cmd->add_option("--height", gen.height, "Sample height");
  gen_cmd->add_option("--width", gen.width, "Sample width");
  add_config_option(gen_cmd);

  CalibrateArgs cal;
  CLI::App* cal_cmd = app.add_subcommand("calibrate", "Calibrate one image");
  cal_cmd->add_option("--input", cal.input, "Input PNG")->required();
  cal_cmd->add_option("--localizer", cal.localizer,
                      "oracle[:alpha=..] | heuristic | descent[:steps=..] | "
                      "crop-oracle[:frac=..]");
  cal_cmd->add_option("--sidecar", cal.sidecar,
                      "Ground-truth sidecar for oracle kinds");
  cal_cmd->add_option("--template", cal.template_path,
                      "Rectification target for descent");
  cal_cmd->add_option("--iters", cal.iters, "Iteration count")
      ->check(CLI::PositiveNumber);
  cal_cmd->add_option("--mode", cal.mode, "fp-refine | direct");
  cal_cmd->add_option("--k", cal.k, "Fiducial count");
  cal_cmd->add_option("--margin", cal.margin, "Base-point margin");
  cal_cmd->add_option("--out-prefix", cal.out_prefix, "Output path prefix");
  add_config_option(cal_cmd);

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a corpus");
  eval_cmd->add_option("--manifest", ev.manifest, "Corpus manifest")->required();
  eval_cmd->add_option("--localizer", ev.localizer, "Localizer spec");
  eval_cmd->add_option("--iters", ev.iters, "Comma list of iteration counts");
  eval_cmd->add_option("--modes", ev.modes, "Comma list of modes");
  eval_cmd->add_option("--jobs", ev.jobs, "Worker threads (0 = all cores)");
  eval_cmd->add_option("--out", ev.out_dir, "Report directory");
  add_config_option(eval_cmd);

  VizArgs viz;
  CLI::App* viz_cmd = app.add_subcommand("viz", "Render a calibration trace");
  viz_cmd->add_option("--trace", viz.trace, "Trace JSON")->required();
  viz_cmd->add_option("--input", viz.input, "Original image")->required();
  viz_cmd->add_option("--out", viz.out, "Output PNG");
  add_config_option(viz_cmd);

  WarpArgs wa;
  CLI::App* warp_cmd = app.add_subcommand("warp", "Apply a single TPS warp");
  warp_cmd->add_option("--input", wa.input, "Input PNG")->required();
  warp_cmd->add_option("--fiducials", wa.fiducials, "Target fiducial JSON")
      ->required();
  warp_cmd->add_option("--out", wa.out, "Output PNG");
  warp_cmd->add_option("--k", wa.k, "Fiducial count");
  warp_cmd->add_option("--margin", wa.margin, "Base-point margin");
  warp_cmd->add_option("--height", wa.height, "Output height");
  warp_cmd->add_option("--width", wa.width, "Output width");
  add_config_option(warp_cmd);

  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty()) {
    const std::string cfg = config_path_from(args);
    if (!cfg.empty()) {
      try {
        args = expand_config(std::move(args), cfg);
      } catch (const rcn::Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
      }
    }
  }
  // CLI11's vector overload consumes arguments back to front.
  std::reverse(args.begin(), args.end());

  try {
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen);
    if (cal_cmd->parsed()) return cmd_calibrate(cal);
    if (eval_cmd->parsed()) return cmd_eval(ev);
    if (viz_cmd->parsed()) return cmd_viz(viz);
    if (warp_cmd->parsed()) return cmd_warp(wa);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const rcn::InvalidArgumentError& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return 2;
  } catch (const rcn::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
