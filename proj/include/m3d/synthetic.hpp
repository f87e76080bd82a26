#pragma once

// Analytic stereo scenes: a textured surface seen by a rectified rig, with
// exactly known disparity and depth in both views.

#include <cstdint>
#include <string>

#include "m3d/fields.hpp"
#include "m3d/objective.hpp"

namespace m3d {

enum class SurfaceKind { fronto_parallel, slanted, sinusoidal };

std::string to_string(SurfaceKind kind);
SurfaceKind surface_from_string(const std::string& name);

struct SurfaceSpec {
  SurfaceKind kind = SurfaceKind::fronto_parallel;
  /// Depth of the plane (fronto-parallel) or of the relief's mean surface.
  double depth = 40.0;
  /// Slanted plane: left disparity d(x) = bf/depth + slope * (x - cx).
  double slope = 0.05;
  /// Sinusoidal relief Z(X) = depth + amplitude * sin(2 pi X / period).
  double amplitude = 2.0;
  double period = 20.0;
};

struct TextureSpec {
  int octaves = 3;
  double contrast = 0.9;
  /// Period of the coarsest octave, in pixels at the reference depth.
  double base_period_px = 64.0;
  int channels = 3;
};

struct SyntheticSceneSpec {
  SurfaceSpec surface;
  TextureSpec texture;
  CameraRig rig{80.0, 39.5, 31.5, 5.0, 80, 64};
  /// Columns [0, occluder_band) of the right image are blocked by a dark
  /// occluder; 0 disables it.
  int occluder_band = 0;
};

struct SyntheticScene {
  StereoPair images;
  DisparityField gt_dl;
  DisparityField gt_dr;
  DepthMap gt_depth_l;
  DepthMap gt_depth_r;
  /// Pixels whose surface point is also seen by the other camera.
  BinaryMask covisible_l;
  BinaryMask covisible_r;
  CameraRig rig;
};

/// Intensity the occluder band shows in the right image.
inline constexpr double kOccluderIntensity = 0.05;

SyntheticScene synth_scene(const SyntheticSceneSpec& spec, std::uint64_t seed);

/// Named presets: "plane", "slant", "relief", "slant-occluded".
SyntheticSceneSpec scene_preset(const std::string& name, int height = 64, int width = 80);

}  // namespace m3d
