#pragma once

// Structured-light ground truth: gray-code stripes with inverse patterns,
// three-step phase modulation depth, and triangulation against a projector
// modelled as a second rectified pinhole.

#include <array>
#include <cstdint>
#include <numbers>
#include <vector>

#include "m3d/fields.hpp"

namespace m3d {

std::uint32_t binary_to_gray(std::uint32_t b);
std::uint32_t gray_to_binary(std::uint32_t g);

/// Vertical stripe patterns; patterns[k][c] is bit (bit_count - 1 - k) of
/// gray(c), so pattern 0 carries the most significant bit.
struct GrayCodeSet {
  int projector_width = 0;
  int bit_count = 0;
  std::vector<std::vector<std::uint8_t>> patterns;
  std::vector<std::vector<std::uint8_t>> inverses;

  [[nodiscard]] std::uint32_t codeword(int column) const;
};

GrayCodeSet generate_gray_patterns(int projector_width);

struct CorrespondenceMap {
  /// Decoded projector column per camera pixel; -1 where uncertain.
  std::vector<int> column;
  BinaryMask certain;

  [[nodiscard]] int height() const { return certain.height(); }
  [[nodiscard]] int width() const { return certain.width(); }
  [[nodiscard]] int at(int i, int j) const {
    return column[static_cast<std::size_t>(i) * width() + j];
  }
};

inline constexpr double kGrayContrastEpsilon = 0.02;

/// captures[k] was taken under patterns[k], inverse_captures[k] under its
/// inverse. A pixel is uncertain if any bit has contrast below `epsilon` or
/// the decoded column falls outside the projector.
CorrespondenceMap decode_gray(const std::vector<ImagePlane>& captures,
                              const std::vector<ImagePlane>& inverse_captures,
                              int projector_width, double epsilon = kGrayContrastEpsilon);

struct ProjectorModel {
  double focal = 0.0;
  double cx = 0.0;
  /// Offset along +x from the camera centre.
  double baseline = 0.0;
  int width = 0;

  void validate() const;
};

/// Continuous projector column lit at each camera pixel, for a camera with
/// intrinsics `rig` seeing `depth`; NaN where the depth is invalid.
ScalarField projector_columns(const DepthMap& depth, const CameraRig& rig,
                              const ProjectorModel& projector);

/// Noiseless captures: a pixel lit by projector column round(c) reads
/// `bright` where the stripe is on and `dark` otherwise. Pixels that see no
/// projector column read `dark` under every pattern and inverse.
struct GrayCaptures {
  std::vector<ImagePlane> captures;
  std::vector<ImagePlane> inverse_captures;
};
GrayCaptures render_gray_captures(const ScalarField& columns, const GrayCodeSet& set,
                                  double bright = 0.9, double dark = 0.1);

inline constexpr double kModulationThreshold = 0.05;

struct PhasePatternSet {
  ImagePlane i1, i2, i3;
  std::array<double, 3> phase_shifts{0.0, 2.0 * std::numbers::pi / 3.0,
                                     4.0 * std::numbers::pi / 3.0};
  double threshold = kModulationThreshold;
};

struct ModulationResult {
  /// Not clamped to [0, 1]: arbitrary captures can exceed it.
  ScalarField t;
  BinaryMask certain;
};

/// T = (2 sqrt 2 / 3) sqrt((I1-I2)^2 + (I2-I3)^2 + (I1-I3)^2) on channel-mean
/// intensities; certain where T >= threshold.
ModulationResult modulation_depth(const PhasePatternSet& p);

/// Captures offset + amplitude * cos(phase + shift_k) for a per-pixel phase.
PhasePatternSet render_phase_captures(const ScalarField& phase, double offset, double amplitude,
                                      const std::array<double, 3>& shifts);

/// Depth from camera column and decoded projector column. Uncertain pixels
/// and non-positive depths are invalid.
DepthMap triangulate(const CorrespondenceMap& c, const CameraRig& rig,
                     const ProjectorModel& projector);

}  // namespace m3d
