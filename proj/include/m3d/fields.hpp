#pragma once

// Dense per-pixel field types shared by every module, the pinhole stereo rig
// and the disparity <-> depth relation.
//
// All fields are row-major with 64-bit scalars. The validated types
// (ImagePlane, DisparityField, DepthMap, BinaryMask) check their invariants
// once on construction and are immutable afterwards.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace m3d {

/// Disparities below this are treated as "no correspondence" rather than
/// being turned into infinite depth.
inline constexpr double kMinDisparity = 1e-6;

struct Size2 {
  int height = 0;
  int width = 0;

  [[nodiscard]] std::size_t area() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  friend bool operator==(const Size2&, const Size2&) = default;
};

/// Unconstrained mutable h x w grid; used for gradients, coordinates and
/// other intermediate quantities.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(int height, int width, double fill = 0.0);
  ScalarField(int height, int width, std::vector<double> values);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] Size2 size() const { return {height_, width_}; }

  double& operator()(int i, int j) { return values_[index(i, j)]; }
  double operator()(int i, int j) const { return values_[index(i, j)]; }
  [[nodiscard]] std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * width_ + j;
  }

  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }

  /// Euclidean norm of the flattened field.
  [[nodiscard]] double norm() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// h x w x c intensities in [0, 1], channel-interleaved.
class ImagePlane {
 public:
  ImagePlane() = default;
  ImagePlane(int height, int width, int channels, std::vector<double> data);
  static ImagePlane filled(int height, int width, int channels, double value);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int channels() const { return channels_; }
  [[nodiscard]] Size2 size() const { return {height_, width_}; }

  double operator()(int i, int j, int c = 0) const {
    return data_[(static_cast<std::size_t>(i) * width_ + j) * channels_ + c];
  }
  [[nodiscard]] std::span<const double> data() const { return data_; }
  /// All channels of row i, interleaved.
  [[nodiscard]] std::span<const double> row(int i) const {
    return std::span<const double>(data_).subspan(
        static_cast<std::size_t>(i) * width_ * channels_,
        static_cast<std::size_t>(width_) * channels_);
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Non-negative horizontal disparities in pixels, bounded by a ceiling.
class DisparityField {
 public:
  DisparityField() = default;
  DisparityField(int height, int width, std::vector<double> values,
                 double ceiling = std::numeric_limits<double>::infinity());
  static DisparityField constant(int height, int width, double value);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] Size2 size() const { return {height_, width_}; }
  [[nodiscard]] double ceiling() const { return ceiling_; }

  double operator()(int i, int j) const {
    return values_[static_cast<std::size_t>(i) * width_ + j];
  }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<const double> row(int i) const {
    return std::span<const double>(values_).subspan(
        static_cast<std::size_t>(i) * width_, width_);
  }

 private:
  int height_ = 0;
  int width_ = 0;
  double ceiling_ = std::numeric_limits<double>::infinity();
  std::vector<double> values_;
};

/// Per-pixel 0/1 flags.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::vector<std::uint8_t> bits);
  static BinaryMask ones(int height, int width);
  static BinaryMask zeros(int height, int width);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] Size2 size() const { return {height_, width_}; }

  bool operator()(int i, int j) const {
    return bits_[static_cast<std::size_t>(i) * width_ + j] != 0;
  }
  [[nodiscard]] std::span<const std::uint8_t> bits() const { return bits_; }
  [[nodiscard]] std::size_t count() const;

  [[nodiscard]] BinaryMask operator&(const BinaryMask& other) const;
  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Depths in scene units; invalid pixels hold 0 and are flagged.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int height, int width, std::vector<double> values,
           std::vector<std::uint8_t> valid);
  /// Every finite positive value is valid; everything else is not.
  static DepthMap from_values(int height, int width, std::vector<double> values);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] Size2 size() const { return {height_, width_}; }

  double operator()(int i, int j) const {
    return values_[static_cast<std::size_t>(i) * width_ + j];
  }
  bool valid(int i, int j) const {
    return valid_[static_cast<std::size_t>(i) * width_ + j] != 0;
  }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] BinaryMask validity() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
};

/// Row-major coordinate fields; x(i, j) = j and y(i, j) = i.
struct PixelGrid {
  ScalarField x_coords;
  ScalarField y_coords;
};

PixelGrid make_meshgrid(int height, int width);

/// Rectified pinhole stereo pair sharing focal length and principal point.
/// The right camera sits at +baseline along the left camera's x axis.
class CameraRig {
 public:
  CameraRig(double focal, double cx, double cy, double baseline, int width,
            int height);

  [[nodiscard]] double focal() const { return focal_; }
  [[nodiscard]] double cx() const { return cx_; }
  [[nodiscard]] double cy() const { return cy_; }
  [[nodiscard]] double baseline() const { return baseline_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] Size2 size() const { return {height_, width_}; }

  /// baseline * focal, the numerator of depth = bf / d.
  [[nodiscard]] double bf() const { return baseline_ * focal_; }

  friend bool operator==(const CameraRig&, const CameraRig&) = default;

 private:
  double focal_;
  double cx_;
  double cy_;
  double baseline_;
  int width_;
  int height_;
};

DepthMap disparity_to_depth(const DisparityField& d, const CameraRig& rig);

struct DisparityConversion {
  DisparityField disparity;
  /// 1 where the source depth was valid; 0 where disparity was forced to 0.
  BinaryMask valid;
};

DisparityConversion depth_to_disparity(const DepthMap& depth, const CameraRig& rig);

void require_same_size(Size2 a, Size2 b, const char* what);

}  // namespace m3d
