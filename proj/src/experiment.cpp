#include "m3d/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "m3d/errors.hpp"
#include "m3d/io.hpp"
#include "m3d/parallel.hpp"

namespace m3d {
namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MetricReport median_report(const std::vector<MetricReport>& runs) {
  auto pick = [&](double MetricReport::*m) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.*m);
    return median_of(std::move(v));
  };
  MetricReport out;
  out.abs_rel = pick(&MetricReport::abs_rel);
  out.sq_rel = pick(&MetricReport::sq_rel);
  out.rmse = pick(&MetricReport::rmse);
  out.rmse_log = pick(&MetricReport::rmse_log);
  out.delta1 = pick(&MetricReport::delta1);
  out.delta2 = pick(&MetricReport::delta2);
  out.delta3 = pick(&MetricReport::delta3);
  out.pixel_count = runs.empty() ? 0 : runs.front().pixel_count;
  return out;
}

}  // namespace

SyntheticRun run_synthetic(const ExperimentConfig& cfg) {
  const auto spec = scene_preset(cfg.synth, cfg.synth_height, cfg.synth_width);
  SyntheticRun run{synth_scene(spec, cfg.optimizer.seed), {}, {}, {}};
  run.result = optimize(run.scene.images, run.scene.rig, cfg.weights, cfg.objective, cfg.optimizer);
  run.dl = run.result.params.disparity(View::left);
  run.dr = run.result.params.disparity(View::right);
  return run;
}

double mean_abs_error(const DisparityField& d, const DisparityField& gt, const BinaryMask& mask) {
  require_same_size(d.size(), gt.size(), "mean_abs_error");
  require_same_size(d.size(), mask.size(), "mean_abs_error");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < d.values().size(); ++k) {
    if (!mask.bits()[k]) continue;
    sum += std::abs(d.values()[k] - gt.values()[k]);
    ++n;
  }
  if (n == 0) throw EmptyEvaluation("mean_abs_error: empty mask");
  return sum / static_cast<double>(n);
}

DepthMap capped_depth(const DisparityField& d, const CameraRig& rig, double cap) {
  if (!(cap > 0.0)) throw InvalidArgument("capped_depth: cap must be > 0");
  std::vector<double> z(d.values().size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double dk = d.values()[k];
    z[k] = dk > 0.0 ? std::min(rig.bf() / dk, cap) : cap;
  }
  return DepthMap(d.height(), d.width(), std::move(z), std::vector<std::uint8_t>(z.size(), 1));
}

std::vector<std::string> trace_header() {
  return {"iteration", "ap_l", "ap_r", "ds_l", "ds_r", "lr2d_l", "lr2d_r", "gc3d", "total", "grad_norm"};
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  CsvWriter csv(trace_header());
  for (const auto& t : trace) {
    csv.add_row(std::to_string(t.iteration),
                {t.ap_l, t.ap_r, t.ds_l, t.ds_r, t.lr2d_l, t.lr2d_r, t.gc3d, t.total, t.grad_norm});
  }
  return csv.str();
}

const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> v{
      {"2D-only", false, false}, {"+3GC", true, false}, {"+3GC+mask", true, true}};
  return v;
}

AblationResult run_ablation(const ExperimentConfig& cfg) {
  const auto& variants = ablation_variants();
  AblationResult out;
  for (int s = 0; s < cfg.ablation_seeds; ++s) out.seeds.push_back(cfg.optimizer.seed + s);
  const std::size_t n_seeds = out.seeds.size();

  auto reports = parallel_map(variants.size() * n_seeds, [&](std::size_t job) {
    const auto& v = variants[job / n_seeds];
    ExperimentConfig c = cfg;
    c.optimizer.seed = out.seeds[job % n_seeds];
    c.objective.enable_3gc = v.enable_3gc;
    c.objective.enable_blind_mask = v.enable_blind_mask;
    const SyntheticRun run = run_synthetic(c);
    const auto& gt = run.scene.gt_depth_l;
    double zmax = 0.0;
    for (std::size_t k = 0; k < gt.values().size(); ++k) {
      if (run.scene.covisible_l.bits()[k]) zmax = std::max(zmax, gt.values()[k]);
    }
    const double cap = cfg.ablation_depth_cap * zmax;
    return compute_metrics(capped_depth(run.dl, run.scene.rig, cap), gt, run.scene.covisible_l,
                           MetricOptions{cap});
  });

  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    AblationRow row{variants[vi], {}, {}};
    row.per_seed.assign(reports.begin() + vi * n_seeds, reports.begin() + (vi + 1) * n_seeds);
    row.median = median_report(row.per_seed);
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string ablation_csv(const AblationResult& r) {
  std::vector<std::string> header{"variant"};
  for (const auto& m : metric_names()) header.push_back(m);
  CsvWriter csv(header);
  for (const auto& row : r.rows) csv.add_row(row.variant.name, metric_values(row.median));
  return csv.str();
}

std::string ablation_seed_csv(const AblationResult& r) {
  std::vector<std::string> header{"variant", "seed"};
  for (const auto& m : metric_names()) header.push_back(m);
  CsvWriter csv(header);
  for (const auto& row : r.rows) {
    for (std::size_t s = 0; s < row.per_seed.size(); ++s) {
      std::vector<std::string> cells{row.variant.name, std::to_string(r.seeds[s])};
      for (double v : metric_values(row.per_seed[s])) cells.push_back(format_double(v));
      csv.add_row(cells);
    }
  }
  return csv.str();
}

}  // namespace m3d
