#include "m3d/objective.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "m3d/errors.hpp"
#include "m3d/warp.hpp"

namespace m3d {
namespace {

void require_finite(const TermValueGrad& t, const char* name) {
  bool ok = std::isfinite(t.value);
  for (double v : t.grad_dl.values()) ok = ok && std::isfinite(v);
  for (double v : t.grad_dr.values()) ok = ok && std::isfinite(v);
  if (!ok) throw NumericalFailure(std::string("non-finite value in loss term ") + name);
}

void axpy(ScalarField& y, double a, const ScalarField& x) {
  auto yv = y.values();
  const auto xv = x.values();
  for (std::size_t k = 0; k < yv.size(); ++k) yv[k] += a * xv[k];
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {alpha_ap, alpha_ds, alpha_lr2d, beta}) {
    if (!(std::isfinite(v) && v >= 0.0)) throw InvalidArgument("LossWeights: weights must be finite and >= 0");
  }
}

std::string to_string(RegularizerUnit unit) {
  return unit == RegularizerUnit::pixels ? "pixels" : "image_width";
}

RegularizerUnit regularizer_unit_from_string(const std::string& name) {
  if (name == "pixels") return RegularizerUnit::pixels;
  if (name == "image_width") return RegularizerUnit::image_width;
  throw InvalidArgument("unknown regularizer unit '" + name + "'");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

DisparityField DisparityParams::disparity(View view) const {
  const ScalarField& r = raw(view);
  std::vector<double> d(r.values().size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = d_max * sigmoid(r.values()[k]);
  return DisparityField(r.height(), r.width(), std::move(d), d_max);
}

DisparityParams DisparityParams::from_disparity(const DisparityField& dl, const DisparityField& dr,
                                                double d_max) {
  require_same_size(dl.size(), dr.size(), "DisparityParams::from_disparity");
  auto to_raw = [d_max](const DisparityField& d) {
    ScalarField r(d.height(), d.width());
    for (std::size_t k = 0; k < d.values().size(); ++k) {
      const double p = d.values()[k] / d_max;
      if (!(p > 0.0 && p < 1.0)) {
        throw InvalidArgument("DisparityParams::from_disparity: disparity outside (0, d_max)");
      }
      r.values()[k] = logit(p);
    }
    return r;
  };
  return {to_raw(dl), to_raw(dr), d_max};
}

DisparityParams DisparityParams::initial(Size2 size, double d_max, double fraction, double noise,
                                         std::uint64_t seed) {
  if (!(d_max > 0.0)) throw InvalidArgument("DisparityParams::initial: d_max must be > 0");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidArgument("DisparityParams::initial: fraction must lie in (0, 1)");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  const double base = logit(fraction);
  DisparityParams p{ScalarField(size.height, size.width, base),
                    ScalarField(size.height, size.width, base), d_max};
  if (noise > 0.0) {
    for (double& v : p.raw_l.values()) v += gauss(rng);
    for (double& v : p.raw_r.values()) v += gauss(rng);
  }
  return p;
}

double LossBreakdown::grad_norm() const {
  const double a = grad_raw_l.norm(), b = grad_raw_r.norm();
  return std::sqrt(a * a + b * b);
}

LossBreakdown total_loss(const StereoPair& images, const DisparityParams& params,
                         const CameraRig& rig, const LossWeights& w, const ObjectiveConfig& cfg) {
  w.validate();
  require_same_size(images.left.size(), images.right.size(), "total_loss images");
  require_same_size(images.left.size(), params.raw_l.size(), "total_loss params");
  require_same_size(images.left.size(), rig.size(), "total_loss rig");

  const DisparityField dl = params.disparity(View::left);
  const DisparityField dr = params.disparity(View::right);
  const Size2 size = dl.size();
  const BinaryMask ml = cfg.enable_blind_mask ? blind_mask(dl, View::left)
                                              : BinaryMask::ones(size.height, size.width);
  const BinaryMask mr = cfg.enable_blind_mask ? blind_mask(dr, View::right)
                                              : BinaryMask::ones(size.height, size.width);

  LossBreakdown out;
  out.weights = w;
  out.grad_dl = ScalarField(size.height, size.width);
  out.grad_dr = ScalarField(size.height, size.width);
  // Both regularisers are positively homogeneous in the disparity scale, so
  // measuring disparity in image widths just divides value and gradient.
  const double unit = cfg.regularizer_unit == RegularizerUnit::image_width ? 1.0 / size.width : 1.0;
  auto add = [&](const TermValueGrad& t, double weight, const char* name, double scale = 1.0) {
    require_finite(t, name);
    if (t.empty) out.empty_terms.emplace_back(name);
    axpy(out.grad_dl, weight * scale, t.grad_dl);
    axpy(out.grad_dr, weight * scale, t.grad_dr);
    return t.value * scale;
  };

  const WarpResult rec_l = warp_horizontal(images.right, dl, WarpDirection::toward_left);
  const WarpResult rec_r = warp_horizontal(images.left, dr, WarpDirection::toward_right);
  out.ap_l = add(appearance_loss(images.left, rec_l, ml, cfg.gamma, cfg.ssim), w.alpha_ap, "ap_l");
  out.ap_r = add(appearance_loss(images.right, rec_r, mr, cfg.gamma, cfg.ssim), w.alpha_ap, "ap_r");
  out.ds_l = add(smoothness_loss(dl, images.left, View::left, ml), w.alpha_ds, "ds_l", unit);
  out.ds_r = add(smoothness_loss(dr, images.right, View::right, mr), w.alpha_ds, "ds_r", unit);
  const LrConsistency lr = lr_consistency_loss(dl, dr, ml, mr);
  out.lr2d_l = add(lr.left, w.alpha_lr2d, "lr2d_l", unit);
  out.lr2d_r = add(lr.right, w.alpha_lr2d, "lr2d_r", unit);
  if (cfg.enable_3gc && w.beta > 0.0) {
    out.gc3d = add(geometric_consistency_loss(dl, dr, rig, ml, mr, cfg.geometric).term, w.beta,
                   "gc3d");
  }
  out.total = w.alpha_ap * (out.ap_l + out.ap_r) + w.alpha_ds * (out.ds_l + out.ds_r) +
              w.alpha_lr2d * (out.lr2d_l + out.lr2d_r) + w.beta * out.gc3d;
  if (!std::isfinite(out.total)) throw NumericalFailure("non-finite total loss");

  auto chain = [&](const ScalarField& grad_d, const ScalarField& raw) {
    ScalarField g(raw.height(), raw.width());
    for (std::size_t k = 0; k < g.values().size(); ++k) {
      const double s = sigmoid(raw.values()[k]);
      g.values()[k] = grad_d.values()[k] * params.d_max * s * (1.0 - s);
    }
    return g;
  };
  out.grad_raw_l = chain(out.grad_dl, params.raw_l);
  out.grad_raw_r = chain(out.grad_dr, params.raw_r);
  return out;
}

std::uint64_t iteration_seed(std::uint64_t seed, int iteration) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(iteration) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

OptimizeResult optimize(const StereoPair& images, const CameraRig& rig, const LossWeights& w,
                        const ObjectiveConfig& cfg, const OptimizerConfig& opt) {
  const double d_max = opt.d_max > 0.0 ? opt.d_max : 0.3 * images.left.width();
  return optimize_from(images, rig, w, cfg, opt,
                       DisparityParams::initial(images.left.size(), d_max, opt.init_fraction,
                                                opt.init_noise, opt.seed));
}

OptimizeResult optimize_from(const StereoPair& images, const CameraRig& rig, const LossWeights& w,
                             const ObjectiveConfig& cfg, const OptimizerConfig& opt,
                             DisparityParams start) {
  if (opt.iterations < 0) throw InvalidArgument("optimize: iterations must be >= 0");
  if (!(opt.step >= 0.0 && std::isfinite(opt.step))) throw InvalidArgument("optimize: step must be finite and >= 0");
  if (!(opt.momentum >= 0.0 && opt.momentum < 1.0)) throw InvalidArgument("optimize: momentum must lie in [0, 1)");
  OptimizeResult result{std::move(start), {}};
  DisparityParams& p = result.params;
  ScalarField vel_l(p.raw_l.height(), p.raw_l.width());
  ScalarField vel_r(p.raw_r.height(), p.raw_r.width());

  double initial_total = 0.0;
  const double rate = opt.step * static_cast<double>(p.raw_l.size().area());
  ObjectiveConfig step_cfg = cfg;
  // Row `iterations` scores the final parameters and takes no step.
  for (int it = 0; it <= opt.iterations; ++it) {
    step_cfg.geometric.seed = iteration_seed(opt.seed, it);
    const LossBreakdown b = total_loss(images, p, rig, w, step_cfg);
    result.trace.push_back({it, b.ap_l, b.ap_r, b.ds_l, b.ds_r, b.lr2d_l, b.lr2d_r, b.gc3d, b.total,
                            b.grad_norm()});
    if (it == 0) initial_total = b.total;
    if (!std::isfinite(b.total) || b.total > opt.divergence_factor * initial_total) {
      std::ostringstream os;
      os << "optimisation diverged at iteration " << it << " (total " << b.total << ")";
      throw DivergenceError(os.str(), std::move(result.trace));
    }
    if (it == opt.iterations) break;
    auto update = [&](ScalarField& raw, ScalarField& vel, const ScalarField& grad) {
      auto r = raw.values();
      auto v = vel.values();
      const auto g = grad.values();
      for (std::size_t k = 0; k < r.size(); ++k) {
        v[k] = opt.momentum * v[k] - rate * g[k];
        r[k] += v[k];
      }
    };
    update(p.raw_l, vel_l, b.grad_raw_l);
    update(p.raw_r, vel_r, b.grad_raw_r);
  }
  return result;
}

std::vector<double> eval_objective_profile(const StereoPair& images, const CameraRig& rig,
                                           const LossWeights& w, const ObjectiveConfig& cfg,
                                           const DisparityParams& params,
                                           const ParamDirection& direction,
                                           const std::vector<double>& steps) {
  require_same_size(direction.raw_l.size(), params.raw_l.size(), "eval_objective_profile");
  require_same_size(direction.raw_r.size(), params.raw_r.size(), "eval_objective_profile");
  std::vector<double> out;
  out.reserve(steps.size());
  for (double t : steps) {
    DisparityParams q = params;
    axpy(q.raw_l, t, direction.raw_l);
    axpy(q.raw_r, t, direction.raw_r);
    out.push_back(total_loss(images, q, rig, w, cfg).total);
  }
  return out;
}

}  // namespace m3d
