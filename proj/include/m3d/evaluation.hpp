#pragma once

// The seven standard depth-error criteria and optional median scaling.

#include <optional>
#include <string>
#include <vector>

#include "m3d/fields.hpp"

namespace m3d {

struct MetricReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t pixel_count = 0;
};

/// Column order of a report row.
const std::vector<std::string>& metric_names();
std::vector<double> metric_values(const MetricReport& r);

struct MetricOptions {
  /// Predictions are clipped to this depth before comparison when set.
  std::optional<double> max_depth;
};

/// Metrics over pixels valid in `valid` and in both maps. Throws
/// EmptyEvaluation when no pixel remains and InvalidArgument when a counted
/// ground-truth depth is not positive.
MetricReport compute_metrics(const DepthMap& pred, const DepthMap& gt, const BinaryMask& valid,
                             const MetricOptions& opt = {});

struct MedianScaled {
  DepthMap depth;
  double scale = 1.0;
};

/// Multiplies pred by median(gt) / median(pred) over the jointly valid pixels.
MedianScaled median_scale(const DepthMap& pred, const DepthMap& gt, const BinaryMask& valid);

}  // namespace m3d
