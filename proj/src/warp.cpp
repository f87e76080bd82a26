#include "m3d/warp.hpp"

#include <algorithm>
#include <cmath>

namespace m3d {

RowSample sample_row(std::span<const double> row, double x, int stride, int offset) {
  const int w = static_cast<int>(row.size()) / stride;
  auto at = [&](int col) { return row[static_cast<std::size_t>(col) * stride + offset]; };

  RowSample s;
  s.in_bounds = x >= 0.0 && x <= w - 1;
  if (!s.in_bounds) {
    const int col = x < 0.0 ? 0 : w - 1;
    s.value = at(col);
    s.i0 = s.i1 = col;
    return s;
  }
  if (w == 1) {
    s.value = at(0);
    return s;
  }
  const int x0 = static_cast<int>(std::floor(x));
  if (x0 >= w - 1) {
    s.value = at(w - 1);
    s.slope = at(w - 1) - at(w - 2);
    s.i0 = w - 1;
    s.i1 = w - 2;
    return s;
  }
  const double t = x - x0;
  const double a = at(x0);
  const double b = at(x0 + 1);
  s.value = a + t * (b - a);
  s.slope = b - a;
  s.i0 = x0;
  s.i1 = x0 + 1;
  s.w0 = 1.0 - t;
  s.w1 = t;
  return s;
}

WarpResult warp_horizontal(const ImagePlane& source, const DisparityField& d,
                           WarpDirection direction) {
  require_same_size(source.size(), d.size(), "warp_horizontal");
  const int h = source.height();
  const int w = source.width();
  const int ch = source.channels();
  const View view = target_view(direction);
  const double sign = coordinate_sign(view);

  std::vector<double> out(source.data().size());
  std::vector<double> jac(source.data().size(), 0.0);
  std::vector<std::uint8_t> inside(d.size().area(), 0);

  for (int i = 0; i < h; ++i) {
    const auto row = source.row(i);
    for (int j = 0; j < w; ++j) {
      const double x = correspondent_column(view, j, d(i, j));
      const auto k = static_cast<std::size_t>(i) * w + j;
      for (int c = 0; c < ch; ++c) {
        const RowSample s = sample_row(row, x, ch, c);
        // Convex combination of [0, 1] values; the clamp only absorbs rounding.
        out[k * ch + c] = std::clamp(s.value, 0.0, 1.0);
        jac[k * ch + c] = s.in_bounds ? sign * s.slope : 0.0;
        inside[k] = s.in_bounds;
      }
    }
  }
  return {direction, ImagePlane(h, w, ch, std::move(out)), BinaryMask(h, w, std::move(inside)),
          std::move(jac)};
}

BinaryMask blind_mask(const DisparityField& d, View view) {
  const int w = d.width();
  std::vector<std::uint8_t> bits(d.size().area(), 0);
  for (int i = 0; i < d.height(); ++i) {
    for (int j = 0; j < w; ++j) {
      const double x = correspondent_column(view, j, d(i, j));
      bits[static_cast<std::size_t>(i) * w + j] = x >= 0.0 && x <= w - 1;
    }
  }
  return BinaryMask(d.height(), w, std::move(bits));
}

}  // namespace m3d
