#include "m3d/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "m3d/errors.hpp"

namespace m3d {
namespace {

std::vector<std::size_t> joint_pixels(const DepthMap& pred, const DepthMap& gt,
                                      const BinaryMask& valid, const char* what) {
  require_same_size(pred.size(), gt.size(), what);
  require_same_size(pred.size(), valid.size(), what);
  std::vector<std::size_t> idx;
  for (int i = 0; i < pred.height(); ++i) {
    for (int j = 0; j < pred.width(); ++j) {
      if (valid(i, j) && pred.valid(i, j) && gt.valid(i, j)) {
        idx.push_back(static_cast<std::size_t>(i) * pred.width() + j);
      }
    }
  }
  if (idx.empty()) throw EmptyEvaluation(std::string(what) + ": no valid pixels");
  return idx;
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lo + hi);
}

}  // namespace

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"abs_rel", "sq_rel", "rmse", "rmse_log",
                                              "delta1", "delta2", "delta3"};
  return names;
}

std::vector<double> metric_values(const MetricReport& r) {
  return {r.abs_rel, r.sq_rel, r.rmse, r.rmse_log, r.delta1, r.delta2, r.delta3};
}

MetricReport compute_metrics(const DepthMap& pred, const DepthMap& gt, const BinaryMask& valid,
                             const MetricOptions& opt) {
  if (opt.max_depth && !(*opt.max_depth > 0.0)) {
    throw InvalidArgument("compute_metrics: max_depth must be > 0");
  }
  const auto idx = joint_pixels(pred, gt, valid, "compute_metrics");
  const auto p_all = pred.values();
  const auto g_all = gt.values();

  double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0, sq_log = 0.0;
  std::size_t d1 = 0, d2 = 0, d3 = 0;
  for (std::size_t k : idx) {
    const double g = g_all[k];
    if (!(g > 0.0)) throw InvalidArgument("compute_metrics: non-positive ground-truth depth");
    const double p = opt.max_depth ? std::min(p_all[k], *opt.max_depth) : p_all[k];
    const double e = p - g;
    abs_rel += std::abs(e) / g;
    sq_rel += e * e / g;
    sq += e * e;
    const double le = std::log(p) - std::log(g);
    sq_log += le * le;
    const double ratio = std::max(p / g, g / p);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
  }
  const auto n = static_cast<double>(idx.size());
  MetricReport r;
  r.abs_rel = abs_rel / n;
  r.sq_rel = sq_rel / n;
  r.rmse = std::sqrt(sq / n);
  r.rmse_log = std::sqrt(sq_log / n);
  r.delta1 = static_cast<double>(d1) / n;
  r.delta2 = static_cast<double>(d2) / n;
  r.delta3 = static_cast<double>(d3) / n;
  r.pixel_count = idx.size();
  return r;
}

MedianScaled median_scale(const DepthMap& pred, const DepthMap& gt, const BinaryMask& valid) {
  const auto idx = joint_pixels(pred, gt, valid, "median_scale");
  std::vector<double> p, g;
  for (std::size_t k : idx) {
    p.push_back(pred.values()[k]);
    g.push_back(gt.values()[k]);
  }
  const double mp = median(std::move(p));
  if (mp == 0.0) throw InvalidArgument("median_scale: median prediction is zero");
  const double scale = median(std::move(g)) / mp;
  std::vector<double> scaled(pred.values().begin(), pred.values().end());
  const BinaryMask pred_valid = pred.validity();
  std::vector<std::uint8_t> ok(pred_valid.bits().begin(), pred_valid.bits().end());
  for (std::size_t k = 0; k < scaled.size(); ++k) {
    if (ok[k]) scaled[k] *= scale;
  }
  return {DepthMap(pred.height(), pred.width(), std::move(scaled), std::move(ok)), scale};
}

}  // namespace m3d
