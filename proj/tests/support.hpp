#pragma once

// Shared fixtures and oracles for the unit and acceptance tests. Nothing here
// calls the library code it checks: the finite-difference and brute-force
// oracles are written out from the formulas.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "m3d/fields.hpp"
#include "m3d/geometry.hpp"
#include "m3d/warp.hpp"

namespace m3d::test {

inline ImagePlane random_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(h) * w * c);
  for (auto& x : v) x = u(rng);
  return ImagePlane(h, w, c, std::move(v));
}

/// Smooth-ish random image: a few random sinusoids, so warps and SSIM see
/// structure rather than white noise.
inline ImagePlane smooth_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(h) * w * c);
  for (int k = 0; k < c; ++k) {
    const double fx1 = 0.2 + 0.6 * u(rng), fy1 = 0.1 + 0.5 * u(rng), ph1 = 6.0 * u(rng);
    const double fx2 = 0.5 + 1.0 * u(rng), ph2 = 6.0 * u(rng);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double s = 0.5 + 0.3 * std::sin(fx1 * j + fy1 * i + ph1) + 0.15 * std::sin(fx2 * j - 0.3 * i + ph2);
        v[(static_cast<std::size_t>(i) * w + j) * c + k] = std::clamp(s, 0.0, 1.0);
      }
    }
  }
  return ImagePlane(h, w, c, std::move(v));
}

inline std::vector<double> random_values(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline DisparityField random_disparity(int h, int w, double lo, double hi, std::uint64_t seed) {
  return DisparityField(h, w, random_values(static_cast<std::size_t>(h) * w, lo, hi, seed));
}

inline DisparityField with_value(const DisparityField& d, std::size_t k, double v) {
  std::vector<double> vals(d.values().begin(), d.values().end());
  vals[k] = v;
  return DisparityField(d.height(), d.width(), std::move(vals), d.ceiling());
}

inline double frac_distance(double x) { return std::abs(x - std::round(x)); }

inline double relative_error(double a, double b, double floor = 1e-9) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Brute-force membership test for the blind mask, written directly from the
// definition: left pixels look at j - d, right pixels at j + d.
inline BinaryMask brute_force_mask(const DisparityField& d, View view) {
  std::vector<std::uint8_t> bits;
  for (int i = 0; i < d.height(); ++i) {
    for (int j = 0; j < d.width(); ++j) {
      const double x = view == View::left ? j - d(i, j) : j + d(i, j);
      bits.push_back(x >= 0.0 && x <= d.width() - 1.0 ? 1 : 0);
    }
  }
  return BinaryMask(d.height(), d.width(), std::move(bits));
}

// Independent recomputation of the frozen 3D loss value: both points of every
// sample are lifted through the pinhole model by hand, with the other view's
// disparity interpolated linearly at the (clamped) correspondent column.
inline double frozen_loss_oracle(const DisparityField& dl, const DisparityField& dr, const CameraRig& rig,
                                 const GeometricFreeze& freeze) {
  const int w = dl.width();
  auto lerp = [w](const DisparityField& d, int i, double x) {
    x = std::clamp(x, 0.0, w - 1.0);
    const int x0 = std::min(static_cast<int>(std::floor(x)), w - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const double t = x - x0;
    return d(i, x0) * (1.0 - t) + d(i, x1) * t;
  };
  auto lift = [&rig](double row, double col, double disp, bool right) {
    const double z = rig.baseline() * rig.focal() / disp;
    Vec3 p((col - rig.cx()) * z / rig.focal(), (row - rig.cy()) * z / rig.focal(), z);
    if (right) p.x() += rig.baseline();
    return p;
  };
  std::vector<Vec3> src, tgt;
  for (const auto& s : freeze.samples) {
    const int i = s.pixel.row, j = s.pixel.col;
    if (s.driver == View::left) {
      const double a = dl(i, j);
      const double x = j - a;
      src.push_back(lift(i, j, a, false));
      tgt.push_back(lift(i, std::clamp(x, 0.0, w - 1.0), lerp(dr, i, x), true));
    } else {
      const double a = dr(i, j);
      const double x = j + a;
      tgt.push_back(lift(i, j, a, true));
      src.push_back(lift(i, std::clamp(x, 0.0, w - 1.0), lerp(dl, i, x), false));
    }
  }
  double fwd = 0.0, bwd = 0.0;
  for (std::size_t k = 0; k < src.size(); ++k) {
    const Vec3 moved = freeze.transform.rotation * src[k] + freeze.transform.translation;
    fwd += (moved - tgt[freeze.forward[k]]).norm();
  }
  for (std::size_t m = 0; m < tgt.size(); ++m) {
    const Vec3 moved = freeze.transform.rotation * src[freeze.backward[m]] + freeze.transform.translation;
    bwd += (tgt[m] - moved).norm();
  }
  return 0.5 * (fwd / static_cast<double>(src.size()) + bwd / static_cast<double>(tgt.size()));
}

/// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() /
              ("m3d_" + tag + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Rotation about a unit axis by `angle` radians (Rodrigues, written out).
inline Mat3 axis_rotation(Vec3 axis, double angle) {
  axis.normalize();
  Mat3 k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

/// Angle of a rotation matrix; atan2 of the skew part and the trace stays
/// accurate near zero, where acos of the trace alone does not.
inline double rotation_angle(const Mat3& r) {
  const Vec3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * v.norm(), 0.5 * (r.trace() - 1.0));
}

}  // namespace m3d::test
