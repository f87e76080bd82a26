#pragma once

// End-to-end runs shared by the CLI and the acceptance checks: optimising a
// synthetic scene and the three-way ablation of the geometric term and the
// blind mask.

#include <cstdint>
#include <string>
#include <vector>

#include "m3d/config.hpp"
#include "m3d/evaluation.hpp"
#include "m3d/synthetic.hpp"

namespace m3d {

struct SyntheticRun {
  SyntheticScene scene;
  OptimizeResult result;
  DisparityField dl;
  DisparityField dr;
};

/// Builds `cfg.synth` at the synthetic resolution with texture seed
/// `cfg.optimizer.seed` and optimises it with the configured objective.
SyntheticRun run_synthetic(const ExperimentConfig& cfg);

/// Mean |d - gt| over the pixels set in `mask`.
double mean_abs_error(const DisparityField& d, const DisparityField& gt, const BinaryMask& mask);

/// bf / d capped at `cap`, valid everywhere; a vanishing disparity reads as
/// the cap instead of being dropped.
DepthMap capped_depth(const DisparityField& d, const CameraRig& rig, double cap);

std::vector<std::string> trace_header();
std::string trace_csv(const std::vector<TraceRow>& trace);

struct AblationVariant {
  std::string name;
  bool enable_3gc = false;
  bool enable_blind_mask = false;
};

/// 2D-only, +3GC, +3GC+mask.
const std::vector<AblationVariant>& ablation_variants();

struct AblationRow {
  AblationVariant variant;
  /// Per-metric median over seeds.
  MetricReport median;
  std::vector<MetricReport> per_seed;
};

struct AblationResult {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;
};

/// Runs every variant on `cfg.synth` for seeds seed, seed + 1, ... and
/// scores left depth on the co-visible pixels, capped at
/// ablation_depth_cap times the largest ground-truth depth. Independent runs
/// go through the worker pool.
AblationResult run_ablation(const ExperimentConfig& cfg);

/// variant plus the seven metric medians.
std::string ablation_csv(const AblationResult& r);
/// variant, seed and the seven metrics for every run.
std::string ablation_seed_csv(const AblationResult& r);

}  // namespace m3d
