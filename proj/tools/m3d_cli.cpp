// m3d: command-line front end.
//
// Exit codes: 0 success, 1 usage or invalid argument, 2 file IO, 3 numerical
// failure (divergence, degenerate geometry, empty evaluation).

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "m3d/config.hpp"
#include "m3d/dataset.hpp"
#include "m3d/evaluation.hpp"
#include "m3d/experiment.hpp"
#include "m3d/io.hpp"
#include "m3d/parallel.hpp"
#include "m3d/structured_light.hpp"
#include "m3d/synthetic.hpp"
#include "m3d/warp.hpp"

namespace fs = std::filesystem;
using namespace m3d;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

// Options every command shares: a config file, `--set key=value`
// overrides, named shortcuts for common keys and the output directory.
struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> shortcuts;
  std::string out;
};

class Shortcut {
 public:
  Shortcut(CLI::App* app, Common& common, const std::string& flag, const std::string& key,
           const std::string& help) {
    app->add_option_function<std::string>(
        flag, [&common, key](const std::string& v) { common.shortcuts[key] = v; }, help);
  }
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
  app->add_option("--config", c.config_path, "key = value configuration file");
  app->add_option("--set", c.sets, "Override one key (key=value); repeatable");
  auto* out = app->add_option("--out", c.out, "Output directory");
  if (out_required) out->required();
}

void add_optimizer_flags(CLI::App* app, Common& c) {
  Shortcut(app, c, "--seed", "seed", "Seed of the scene texture, init and point sampling");
  Shortcut(app, c, "--synth", "synth", "Synthetic preset: plane, slant, relief, slant-occluded");
  Shortcut(app, c, "--iters", "iterations", "Optimiser iterations");
  Shortcut(app, c, "--step", "step", "Per-pixel step size");
  Shortcut(app, c, "--beta", "beta", "Weight of the 3D term");
  Shortcut(app, c, "--3gc", "enable_3gc", "Enable the 3D geometric term (true/false)");
  Shortcut(app, c, "--blind-mask", "enable_blind_mask", "Enable blind masking (true/false)");
  Shortcut(app, c, "--height", "synth_height", "Synthetic image height");
  Shortcut(app, c, "--width", "synth_width", "Synthetic image width");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config_path.empty()) cfg = load_config(c.config_path).config;
  for (const auto& [k, v] : c.shortcuts) set_config_value(cfg, k, v);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  validate(cfg);
  return cfg;
}

fs::path prepare_out(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError(out + ": cannot create directory (" + ec.message() + ")");
  return out;
}

void write_manifest(const fs::path& out, const ExperimentConfig& cfg, const std::string& command,
                    const std::map<std::string, std::string>& inputs) {
  write_text(out / "manifest.txt", manifest_text(cfg, command, inputs));
}

std::string metrics_csv(const std::string& label, const MetricReport& r) {
  std::vector<std::string> header{"sample"};
  for (const auto& m : metric_names()) header.push_back(m);
  CsvWriter csv(header);
  csv.add_row(label, metric_values(r));
  return csv.str();
}

DepthMap read_depth_any(const fs::path& p, double units) {
  if (p.extension() == ".png") return read_depth_png16(p, units);
  return read_depth_pfm(p);
}

std::map<std::string, double> read_numeric_kv(const fs::path& p) {
  std::map<std::string, double> kv;
  std::istringstream in(read_text(p));
  std::string line;
  while (std::getline(in, line)) {
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t\r") + 1);
    try {
      kv[key] = std::stod(line.substr(eq + 1));
    } catch (const std::exception&) {
      throw IoError(p.string() + ": bad number for '" + key + "'");
    }
  }
  return kv;
}

double need(const std::map<std::string, double>& kv, const std::string& key, const fs::path& p) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw IoError(p.string() + ": missing '" + key + "'");
  return it->second;
}

void write_disparity_outputs(const fs::path& dir, const DisparityField& dl, const DisparityField& dr,
                             const CameraRig& rig, const ExperimentConfig& cfg, bool depth_png) {
  auto field = [](const DisparityField& d) {
    return ScalarField(d.height(), d.width(), std::vector<double>(d.values().begin(), d.values().end()));
  };
  write_pfm(dir / "disp_l.pfm", field(dl));
  write_pfm(dir / "disp_r.pfm", field(dr));
  const DepthMap depth = disparity_to_depth(dl, rig);
  write_depth_pfm(dir / "depth_l.pfm", depth);
  if (depth_png) {
    // The PNG saturates at its largest count; the PFM keeps the exact values.
    const double top = 65535.0 * cfg.depth_png_units;
    std::vector<double> v(depth.values().begin(), depth.values().end());
    std::vector<std::uint8_t> ok;
    std::size_t clipped = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      ok.push_back(depth.validity().bits()[k]);
      if (ok.back() && v[k] > top) {
        v[k] = top;
        ++clipped;
      }
    }
    if (clipped > 0) {
      std::cerr << "warning: " << clipped << " depths above " << format_double(top) << " saturated in "
                << (dir / "depth_l.png").string() << "\n";
    }
    write_depth_png16(dir / "depth_l.png", DepthMap(depth.height(), depth.width(), std::move(v), std::move(ok)),
                      cfg.depth_png_units);
  }
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Common& c, const std::string& layout_name) {
  const ExperimentConfig cfg = resolve(c);
  const DatasetLayout layout = dataset_layout_from_string(layout_name);
  const fs::path out = prepare_out(c.out);
  const auto spec = scene_preset(cfg.synth, cfg.synth_height, cfg.synth_width);
  const SyntheticScene scene = synth_scene(spec, cfg.optimizer.seed);
  write_dataset_frame(out / "data", layout, cfg.synth, "000000", scene.images, scene.rig,
                      &scene.gt_depth_l, cfg.depth_png_units);
  const fs::path gt = out / "gt";
  fs::create_directories(gt);
  auto field = [](const DisparityField& d) {
    return ScalarField(d.height(), d.width(), std::vector<double>(d.values().begin(), d.values().end()));
  };
  write_pfm(gt / "disp_l.pfm", field(scene.gt_dl));
  write_pfm(gt / "disp_r.pfm", field(scene.gt_dr));
  write_depth_pfm(gt / "depth_l.pfm", scene.gt_depth_l);
  write_depth_pfm(gt / "depth_r.pfm", scene.gt_depth_r);
  write_mask_png(gt / "covisible_l.png", scene.covisible_l);
  write_mask_png(gt / "covisible_r.png", scene.covisible_r);
  write_manifest(out, cfg, "synth", {{"layout", to_string(layout)}});
  std::cout << "wrote " << cfg.synth << " (" << cfg.synth_height << "x" << cfg.synth_width
            << ") to " << (out / "data").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- optimize

int cmd_optimize(const Common& c, const std::string& data, const std::string& layout_name,
                 bool depth_png) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path out = prepare_out(c.out);

  if (data.empty()) {
    write_manifest(out, cfg, "optimize", {});
    std::optional<SyntheticRun> result;
    try {
      result.emplace(run_synthetic(cfg));
    } catch (const DivergenceError& e) {
      write_text(out / "trace.csv", trace_csv(e.trace()));
      throw;
    }
    const SyntheticRun& run = *result;
    write_text(out / "trace.csv", trace_csv(run.result.trace));
    write_disparity_outputs(out, run.dl, run.dr, run.scene.rig, cfg, depth_png);

    MetricOptions mopt;
    if (cfg.max_depth > 0.0) mopt.max_depth = cfg.max_depth;
    DepthMap pred = disparity_to_depth(run.dl, run.scene.rig);
    if (cfg.median_scaling) pred = median_scale(pred, run.scene.gt_depth_l, run.scene.covisible_l).depth;
    const MetricReport r = compute_metrics(pred, run.scene.gt_depth_l, run.scene.covisible_l, mopt);
    write_text(out / "metrics.csv", metrics_csv(cfg.synth, r));
    const double mae = mean_abs_error(run.dl, run.scene.gt_dl, BinaryMask::ones(run.dl.height(), run.dl.width()));
    std::cout << cfg.synth << ": " << run.result.trace.size() - 1 << " iterations, final total "
              << format_double(run.result.trace.back().total) << ", mean |d - gt| "
              << format_double(mae) << " px, rmse " << format_double(r.rmse) << "\n";
    return 0;
  }

  DatasetOptions dopt{cfg.work_height, cfg.work_width, cfg.depth_png_units};
  DatasetReader reader(data, dataset_layout_from_string(layout_name), dopt);
  std::vector<DatasetSample> samples;
  while (auto s = reader.next()) samples.push_back(std::move(*s));

  struct Outcome {
    std::string name;
    std::optional<MetricReport> metrics;
    std::string error;
  };
  auto outcomes = parallel_map(samples.size(), [&](std::size_t k) {
    const DatasetSample& s = samples[k];
    Outcome o{s.sequence + "/" + s.frame, std::nullopt, {}};
    const fs::path dir = out / s.sequence / s.frame;
    fs::create_directories(dir);
    try {
      const auto res = optimize(s.images, s.rig, cfg.weights, cfg.objective, cfg.optimizer);
      write_text(dir / "trace.csv", trace_csv(res.trace));
      const auto dl = res.params.disparity(View::left);
      write_disparity_outputs(dir, dl, res.params.disparity(View::right), s.rig, cfg, depth_png);
      if (s.gt_depth) {
        MetricOptions mopt;
        if (cfg.max_depth > 0.0) mopt.max_depth = cfg.max_depth;
        DepthMap pred = disparity_to_depth(dl, s.rig);
        const BinaryMask all = BinaryMask::ones(pred.height(), pred.width());
        if (cfg.median_scaling) pred = median_scale(pred, *s.gt_depth, all).depth;
        o.metrics = compute_metrics(pred, *s.gt_depth, all, mopt);
      }
    } catch (const DivergenceError& e) {
      write_text(dir / "trace.csv", trace_csv(e.trace()));
      o.error = e.what();
    } catch (const NumericalFailure& e) {
      o.error = e.what();
    } catch (const EmptyEvaluation& e) {
      o.error = e.what();
    }
    return o;
  });

  std::vector<std::string> header{"sample"};
  for (const auto& m : metric_names()) header.push_back(m);
  CsvWriter metrics(header);
  CsvWriter skipped({"path", "reason"});
  for (const auto& r : reader.skipped()) skipped.add_row({r.path.lexically_relative(data).string(), r.reason});
  int failures = 0;
  for (const auto& o : outcomes) {
    if (o.metrics) metrics.add_row(o.name, metric_values(*o.metrics));
    if (!o.error.empty()) {
      skipped.add_row({o.name, "optimisation failed: " + o.error});
      ++failures;
    }
  }
  metrics.write(out / "metrics.csv");
  skipped.write(out / "skipped.csv");
  write_manifest(out, cfg, "optimize", {{"data", data}, {"layout", layout_name}});
  std::cout << samples.size() << " samples optimised, " << reader.skipped().size() << " skipped, "
            << failures << " failed\n";
  return failures > 0 ? kExitNumerical : 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const Common& c, const std::string& pred_path, const std::string& gt_path,
             const std::string& mask_path) {
  const ExperimentConfig cfg = resolve(c);
  DepthMap pred = read_depth_any(pred_path, cfg.depth_png_units);
  const DepthMap gt = read_depth_any(gt_path, cfg.depth_png_units);
  const BinaryMask mask = mask_path.empty() ? BinaryMask::ones(gt.height(), gt.width()) : read_mask_png(mask_path);
  MetricOptions mopt;
  if (cfg.max_depth > 0.0) mopt.max_depth = cfg.max_depth;
  if (cfg.median_scaling) pred = median_scale(pred, gt, mask).depth;
  const MetricReport r = compute_metrics(pred, gt, mask, mopt);
  const std::string csv = metrics_csv(fs::path(pred_path).stem().string(), r);
  std::cout << csv;
  if (!c.out.empty()) {
    const fs::path out = prepare_out(c.out);
    write_text(out / "metrics.csv", csv);
    std::map<std::string, std::string> in{{"pred", pred_path}, {"gt", gt_path}};
    if (!mask_path.empty()) in["mask"] = mask_path;
    write_manifest(out, cfg, "eval", in);
  }
  return 0;
}

// ---------------------------------------------------------------- sl-decode

struct SlOptions {
  std::string captures;
  bool simulate = false;
  double plane_depth = 40.0;
  int projector_width = 0;
  double projector_focal = 0.0;
  double projector_baseline = 5.0;
  double phase_period = 16.0;
};

std::string two_digits(int k) {
  std::string s = std::to_string(k);
  return s.size() < 2 ? "0" + s : s;
}

int cmd_sl_decode(const Common& c, const SlOptions& o) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path out = prepare_out(c.out);
  std::map<std::string, std::string> inputs;

  fs::path cap_dir = o.captures;
  std::optional<DepthMap> gt;
  if (o.simulate) {
    // Fronto-parallel plane seen by the synthetic rig and a projector
    // sharing its intrinsics; captures land in out/captures so the decode
    // path below reads them back like real data.
    const auto spec = scene_preset("plane", cfg.synth_height, cfg.synth_width);
    const CameraRig& rig = spec.rig;
    ProjectorModel proj{o.projector_focal > 0.0 ? o.projector_focal : rig.focal(), rig.cx(),
                        o.projector_baseline, o.projector_width > 0 ? o.projector_width : rig.width()};
    proj.cx = (proj.width - 1) / 2.0;
    proj.validate();
    gt = DepthMap::from_values(rig.height(), rig.width(),
                               std::vector<double>(rig.size().area(), o.plane_depth));
    const ScalarField cols = projector_columns(*gt, rig, proj);
    const GrayCodeSet set = generate_gray_patterns(proj.width);
    const GrayCaptures caps = render_gray_captures(cols, set);
    ScalarField phase(rig.height(), rig.width());
    for (int i = 0; i < rig.height(); ++i) {
      for (int j = 0; j < rig.width(); ++j) {
        phase(i, j) = std::isfinite(cols(i, j)) ? 2.0 * std::numbers::pi * cols(i, j) / o.phase_period : 0.0;
      }
    }
    const PhasePatternSet ph = render_phase_captures(phase, 0.5, 0.4, PhasePatternSet{}.phase_shifts);
    cap_dir = out / "captures";
    fs::create_directories(cap_dir);
    for (int k = 0; k < set.bit_count; ++k) {
      write_image(cap_dir / ("gray_" + two_digits(k) + ".png"), caps.captures[k]);
      write_image(cap_dir / ("inv_" + two_digits(k) + ".png"), caps.inverse_captures[k]);
    }
    write_image(cap_dir / "phase_0.png", ph.i1);
    write_image(cap_dir / "phase_1.png", ph.i2);
    write_image(cap_dir / "phase_2.png", ph.i3);
    write_text(cap_dir / "calib.txt", calibration_text(rig));
    write_text(cap_dir / "projector.txt", "focal = " + format_double(proj.focal) + "\ncx = " +
                                              format_double(proj.cx) + "\nbaseline = " +
                                              format_double(proj.baseline) + "\nwidth = " +
                                              std::to_string(proj.width) + "\n");
    write_depth_pfm(out / "gt_depth.pfm", *gt);
    inputs["simulate"] = "plane";
    inputs["plane_depth"] = format_double(o.plane_depth);
  } else {
    if (cap_dir.empty()) throw InvalidArgument("sl-decode needs --captures or --simulate");
    inputs["captures"] = o.captures;
  }

  const auto pkv = read_numeric_kv(cap_dir / "projector.txt");
  ProjectorModel proj{need(pkv, "focal", cap_dir / "projector.txt"), need(pkv, "cx", cap_dir / "projector.txt"),
                      need(pkv, "baseline", cap_dir / "projector.txt"),
                      static_cast<int>(need(pkv, "width", cap_dir / "projector.txt"))};
  proj.validate();
  const int bits = generate_gray_patterns(proj.width).bit_count;
  std::vector<ImagePlane> caps, invs;
  for (int k = 0; k < bits; ++k) {
    caps.push_back(read_image(cap_dir / ("gray_" + two_digits(k) + ".png")));
    invs.push_back(read_image(cap_dir / ("inv_" + two_digits(k) + ".png")));
  }
  const ImagePlane& first = caps.front();
  const CameraRig rig = parse_calibration(read_text(cap_dir / "calib.txt"), first.width(), first.height());
  CorrespondenceMap corr = decode_gray(caps, invs, proj.width, cfg.sl_epsilon);

  if (fs::exists(cap_dir / "phase_0.png")) {
    PhasePatternSet ph{read_image(cap_dir / "phase_0.png"), read_image(cap_dir / "phase_1.png"),
                       read_image(cap_dir / "phase_2.png")};
    ph.threshold = cfg.sl_threshold;
    const ModulationResult m = modulation_depth(ph);
    write_pfm(out / "modulation.pfm", m.t);
    write_mask_png(out / "modulation_certain.png", m.certain);
    corr.certain = corr.certain & m.certain;
    for (std::size_t k = 0; k < corr.column.size(); ++k) {
      if (!corr.certain.bits()[k]) corr.column[k] = -1;
    }
  }

  ScalarField col_field(corr.height(), corr.width());
  for (std::size_t k = 0; k < corr.column.size(); ++k) col_field.values()[k] = corr.column[k];
  write_pfm(out / "columns.pfm", col_field);
  write_mask_png(out / "certain.png", corr.certain);
  const DepthMap depth = triangulate(corr, rig, proj);
  write_depth_pfm(out / "depth.pfm", depth);
  std::cout << corr.certain.count() << " of " << rig.size().area() << " pixels decoded\n";
  if (gt) {
    const MetricReport r = compute_metrics(depth, *gt, BinaryMask::ones(rig.height(), rig.width()));
    write_text(out / "metrics.csv", metrics_csv("structured-light", r));
    std::cout << "abs_rel " << format_double(r.abs_rel) << " over " << r.pixel_count << " pixels\n";
  }
  write_manifest(out, cfg, "sl-decode", inputs);
  return 0;
}

// ---------------------------------------------------------------- icp-register

int cmd_icp(const Common& c, const std::string& source, const std::string& target) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path out = prepare_out(c.out);
  PointCloud src{read_ply(source), {}};
  PointCloud dst{read_ply(target), {}};
  const IcpOptions opts{cfg.objective.geometric.icp.max_iter, cfg.objective.geometric.icp.tol};
  const IcpResult r = icp(src, dst, opts);

  std::ostringstream t;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double v = i < 3 ? (j < 3 ? r.transform.rotation(i, j) : r.transform.translation(i)) : (j == 3 ? 1.0 : 0.0);
      t << (j ? " " : "") << format_double(v);
    }
    t << "\n";
  }
  write_text(out / "transform.txt", t.str());
  write_ply(out / "registered.ply", r.transform.apply(src).points);
  CsvWriter hist({"iteration", "residual"});
  for (std::size_t k = 0; k < r.history.size(); ++k) hist.add_row(std::to_string(k), {r.history[k]});
  hist.write(out / "history.csv");
  write_manifest(out, cfg, "icp-register", {{"source", source}, {"target", target}});
  std::cout << "residual " << format_double(r.residual) << " after " << r.iterations_used
            << " iterations" << (r.converged ? "" : " (not converged)") << ", rotation "
            << format_double(r.transform.angle()) << " rad\n";
  return 0;
}

// ---------------------------------------------------------------- mask

int cmd_mask(const Common& c, const std::string& disp, const std::string& view_name) {
  const ExperimentConfig cfg = resolve(c);
  if (view_name != "left" && view_name != "right") throw InvalidArgument("--view must be left or right");
  const fs::path out = prepare_out(c.out);
  const ScalarField f = read_pfm_field(disp);
  const DisparityField d(f.height(), f.width(), std::vector<double>(f.values().begin(), f.values().end()));
  const BinaryMask m = blind_mask(d, view_name == "left" ? View::left : View::right);
  write_mask_png(out / "mask.png", m);
  write_manifest(out, cfg, "mask", {{"disp", disp}, {"view", view_name}});
  std::cout << m.count() << " of " << f.size().area() << " pixels visible in the other view\n";
  return 0;
}

// ---------------------------------------------------------------- ablate

int cmd_ablate(Common c) {
  if (!c.shortcuts.count("synth")) c.shortcuts["synth"] = "slant-occluded";
  const ExperimentConfig cfg = resolve(c);
  const fs::path out = prepare_out(c.out);
  const AblationResult r = run_ablation(cfg);
  const std::string csv = ablation_csv(r);
  write_text(out / "ablation.csv", csv);
  write_text(out / "ablation_seeds.csv", ablation_seed_csv(r));
  write_manifest(out, cfg, "ablate", {});
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised stereo depth objective: synthetic scenes, optimisation, evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common c;
  std::string layout = "scared-like", data, pred, gt, mask, disp, view = "left", source, target;
  bool depth_png = false;
  SlOptions sl;

  auto* synth = app.add_subcommand("synth", "Render a synthetic stereo scene as a dataset");
  add_common(synth, c);
  add_optimizer_flags(synth, c);
  synth->add_option("--layout", layout, "scared-like or latte-like");

  auto* opt = app.add_subcommand("optimize", "Fit disparity fields to a synthetic scene or a dataset");
  add_common(opt, c);
  add_optimizer_flags(opt, c);
  opt->add_option("--data", data, "Dataset root; omit to use the synthetic scene");
  opt->add_option("--layout", layout, "scared-like or latte-like");
  opt->add_flag("--depth-png", depth_png, "Also write depth as 16-bit PNG");

  auto* ev = app.add_subcommand("eval", "Seven-metric comparison of a depth map with ground truth");
  add_common(ev, c, false);
  ev->add_option("--pred", pred, "Predicted depth (.pfm or 16-bit .png)")->required();
  ev->add_option("--gt", gt, "Ground-truth depth (.pfm or 16-bit .png)")->required();
  ev->add_option("--mask", mask, "Optional evaluation mask PNG");
  Shortcut(ev, c, "--max-depth", "max_depth", "Clip predictions at this depth (0 = off)");
  Shortcut(ev, c, "--median-scaling", "median_scaling", "Median-scale predictions (true/false)");

  auto* sld = app.add_subcommand("sl-decode", "Decode gray-code captures and triangulate depth");
  add_common(sld, c);
  auto* cap_opt = sld->add_option("--captures", sl.captures, "Capture directory");
  auto* sim_opt = sld->add_flag("--simulate", sl.simulate, "Render and decode a synthetic plane");
  cap_opt->excludes(sim_opt);
  sld->add_option("--plane-depth", sl.plane_depth, "Simulated plane depth");
  sld->add_option("--projector-width", sl.projector_width, "Simulated projector width (default: image width)");
  sld->add_option("--projector-focal", sl.projector_focal, "Simulated projector focal (default: camera focal)");
  sld->add_option("--projector-baseline", sl.projector_baseline, "Simulated projector baseline");
  sld->add_option("--phase-period", sl.phase_period, "Simulated sinusoid period in projector columns");

  auto* icp_cmd = app.add_subcommand("icp-register", "Rigidly align two PLY point clouds");
  add_common(icp_cmd, c);
  icp_cmd->add_option("--source", source, "Source cloud (.ply)")->required();
  icp_cmd->add_option("--target", target, "Target cloud (.ply)")->required();
  Shortcut(icp_cmd, c, "--max-iter", "icp_max_iterations", "ICP iteration cap");
  Shortcut(icp_cmd, c, "--tol", "icp_tolerance", "ICP residual-improvement tolerance");

  auto* mk = app.add_subcommand("mask", "Blind mask of a disparity map");
  add_common(mk, c);
  mk->add_option("--disp", disp, "Disparity PFM")->required();
  mk->add_option("--view", view, "left or right");

  auto* ab = app.add_subcommand("ablate", "2D-only / +3GC / +3GC+mask comparison over seeds");
  add_common(ab, c);
  add_optimizer_flags(ab, c);
  Shortcut(ab, c, "--seeds", "ablation_seeds", "Number of seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(c, layout);
    if (*opt) return cmd_optimize(c, data, layout, depth_png);
    if (*ev) return cmd_eval(c, pred, gt, mask);
    if (*sld) return cmd_sl_decode(c, sl);
    if (*icp_cmd) return cmd_icp(c, source, target);
    if (*mk) return cmd_mask(c, disp, view);
    if (*ab) return cmd_ablate(c);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegenerateGeometry& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const EmptyEvaluation& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
