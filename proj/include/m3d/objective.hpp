#pragma once

// Weighted total of all loss terms with gradients chained through the
// sigmoid disparity parameterisation, and a momentum optimiser that fits the
// two disparity fields of a stereo pair directly.

#include <cstdint>
#include <string>
#include <vector>

#include "m3d/errors.hpp"
#include "m3d/fields.hpp"
#include "m3d/geometry.hpp"
#include "m3d/photometric.hpp"

namespace m3d {

struct StereoPair {
  ImagePlane left;
  ImagePlane right;
};

struct LossWeights {
  double alpha_ap = 1.0;
  double alpha_ds = 0.5;
  double alpha_lr2d = 1.0;
  double beta = 0.001;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Unit in which the smoothness and left-right terms measure disparity.
/// `image_width` divides both by the image width (disparity as a fraction of
/// the width, as the sigmoid output of the Monodepth line of networks is);
/// `pixels` applies them to pixel disparities unchanged.
enum class RegularizerUnit { image_width, pixels };

std::string to_string(RegularizerUnit unit);
RegularizerUnit regularizer_unit_from_string(const std::string& name);

struct ObjectiveConfig {
  double gamma = 0.85;
  SsimParams ssim;
  RegularizerUnit regularizer_unit = RegularizerUnit::image_width;
  bool enable_blind_mask = true;
  bool enable_3gc = true;
  GeometricConfig geometric;
};

/// Unconstrained parameters; disparity = d_max * sigmoid(raw).
struct DisparityParams {
  ScalarField raw_l;
  ScalarField raw_r;
  double d_max = 1.0;

  [[nodiscard]] DisparityField disparity(View view) const;
  [[nodiscard]] const ScalarField& raw(View view) const { return view == View::left ? raw_l : raw_r; }

  /// Raw values reproducing the given disparities (each strictly inside (0, d_max)).
  static DisparityParams from_disparity(const DisparityField& dl, const DisparityField& dr,
                                        double d_max);
  /// sigmoid^-1(fraction) everywhere plus N(0, noise^2) per pixel.
  static DisparityParams initial(Size2 size, double d_max, double fraction, double noise,
                                 std::uint64_t seed);
};

double sigmoid(double x);
double logit(double p);

struct LossBreakdown {
  double total = 0.0;
  double ap_l = 0.0, ap_r = 0.0;
  double ds_l = 0.0, ds_r = 0.0;
  double lr2d_l = 0.0, lr2d_r = 0.0;
  double gc3d = 0.0;
  LossWeights weights;
  ScalarField grad_raw_l;
  ScalarField grad_raw_r;
  /// Gradients with respect to the disparities themselves.
  ScalarField grad_dl;
  ScalarField grad_dr;
  /// Terms that had nothing to average over (empty mask or cloud).
  std::vector<std::string> empty_terms;

  [[nodiscard]] double grad_norm() const;
};

LossBreakdown total_loss(const StereoPair& images, const DisparityParams& params,
                         const CameraRig& rig, const LossWeights& w, const ObjectiveConfig& cfg);

/// `step` multiplies the per-pixel gradient, i.e. the gradient of the
/// pixel-summed objective: the update is step * (h * w) * grad of the
/// mean-normalised total, which keeps the effective rate independent of the
/// image size.
struct OptimizerConfig {
  int iterations = 5000;
  double step = 0.02;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  /// Ceiling of the sigmoid; <= 0 selects 0.3 * image width.
  double d_max = 0.0;
  double init_fraction = 0.1;
  double init_noise = 0.01;
  /// Abort when the total exceeds this multiple of the initial total.
  double divergence_factor = 1e6;
};

struct TraceRow {
  int iteration = 0;
  double ap_l = 0.0, ap_r = 0.0, ds_l = 0.0, ds_r = 0.0, lr2d_l = 0.0, lr2d_r = 0.0, gc3d = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
};

struct OptimizeResult {
  DisparityParams params;
  /// iterations + 1 rows; the last scores the final parameters.
  std::vector<TraceRow> trace;
};

class DivergenceError : public NumericalFailure {
 public:
  DivergenceError(const std::string& what, std::vector<TraceRow> trace)
      : NumericalFailure(what), trace_(std::move(trace)) {}
  [[nodiscard]] const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  std::vector<TraceRow> trace_;
};

/// Seed of the 3D point subsample drawn at a given iteration.
std::uint64_t iteration_seed(std::uint64_t seed, int iteration);

OptimizeResult optimize(const StereoPair& images, const CameraRig& rig, const LossWeights& w,
                        const ObjectiveConfig& cfg, const OptimizerConfig& opt);

/// Same as above, starting from the given parameters.
OptimizeResult optimize_from(const StereoPair& images, const CameraRig& rig, const LossWeights& w,
                             const ObjectiveConfig& cfg, const OptimizerConfig& opt,
                             DisparityParams start);

struct ParamDirection {
  ScalarField raw_l;
  ScalarField raw_r;
};

/// Total loss at params + t * direction for each t in `steps`.
std::vector<double> eval_objective_profile(const StereoPair& images, const CameraRig& rig,
                                           const LossWeights& w, const ObjectiveConfig& cfg,
                                           const DisparityParams& params,
                                           const ParamDirection& direction,
                                           const std::vector<double>& steps);

}  // namespace m3d
