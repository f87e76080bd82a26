#pragma once

// Horizontal, disparity-driven linear resampling of images and fields, and
// the blind mask that flags pixels whose correspondent leaves the other view.
//
// Convention: a left pixel at column x matches column x - d_l(x) in the right
// image; a right pixel at column x matches x + d_r(x) in the left image.

#include <span>
#include <vector>

#include "m3d/fields.hpp"

namespace m3d {

enum class View { left, right };

/// toward_left rebuilds the left image from the right one (sample at x - d),
/// toward_right rebuilds the right image from the left one (sample at x + d).
enum class WarpDirection { toward_left, toward_right };

[[nodiscard]] constexpr View target_view(WarpDirection dir) {
  return dir == WarpDirection::toward_left ? View::left : View::right;
}

/// Sign of d(sample coordinate)/d(disparity) for the given view.
[[nodiscard]] constexpr double coordinate_sign(View view) {
  return view == View::left ? -1.0 : 1.0;
}

/// Column a pixel in `view` samples in the opposite view.
[[nodiscard]] constexpr double correspondent_column(View view, int column, double disparity) {
  return column + coordinate_sign(view) * disparity;
}

/// One linear interpolation along a row.
///
/// Inside [0, w-1] the value is row[i0] + t * (row[i0+1] - row[i0]) and slope
/// is the right-sided difference; at exactly w-1 the left difference is used.
/// Outside the range the coordinate clamps to the border, slope is 0 and
/// in_bounds is false.
struct RowSample {
  double value = 0.0;
  double slope = 0.0;
  int i0 = 0;
  int i1 = 0;
  double w0 = 1.0;
  double w1 = 0.0;
  bool in_bounds = false;
};

/// Samples element `offset` of every `stride`-th entry of `row` at column x.
RowSample sample_row(std::span<const double> row, double x, int stride = 1, int offset = 0);

struct WarpResult {
  WarpDirection direction = WarpDirection::toward_left;
  ImagePlane reconstructed;
  BinaryMask in_bounds;
  /// d reconstructed(i, j, c) / d disparity(i, j), channel-interleaved;
  /// zero wherever in_bounds is 0.
  std::vector<double> d_sample_jacobian;

  [[nodiscard]] double jacobian(int i, int j, int c) const {
    const int ch = reconstructed.channels();
    return d_sample_jacobian[(static_cast<std::size_t>(i) * reconstructed.width() + j) * ch + c];
  }
};

WarpResult warp_horizontal(const ImagePlane& source, const DisparityField& d,
                           WarpDirection direction);

/// 1 where the correspondent column of (i, j) lies in [0, width - 1].
BinaryMask blind_mask(const DisparityField& d, View view);

}  // namespace m3d
