#pragma once

// Masked backprojection of disparity fields into point clouds, exact k-d tree
// nearest neighbours, point-to-point ICP and the 3D geometric consistency
// loss built on top of them.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "m3d/fields.hpp"
#include "m3d/photometric.hpp"
#include "m3d/warp.hpp"

namespace m3d {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct PixelIndex {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

struct PointCloud {
  std::vector<Vec3> points;
  /// Pixel each point was lifted from; may be empty for clouds not built
  /// from a disparity field.
  std::vector<PixelIndex> source_pixel;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  [[nodiscard]] PointCloud apply(const PointCloud& cloud) const;
  /// Rotation angle in radians.
  [[nodiscard]] double angle() const;
  [[nodiscard]] bool is_proper(double tol = 1e-9) const;
};

/// Point of pixel column x (may be fractional), row y with the given
/// disparity. Right-view points are shifted by +baseline along x so both
/// views share the left camera frame.
Vec3 backproject_point(const CameraRig& rig, View view, double y, double x, double disparity);

struct Backprojection {
  PointCloud cloud;
  /// Mask-in pixels skipped because their disparity was below kMinDisparity.
  std::size_t skipped = 0;
};

Backprojection backproject(const DisparityField& d, const CameraRig& rig, const BinaryMask& mask,
                           View view);

/// Uniform sample of n indices out of `count` without replacement, returned
/// in ascending order. All indices when n >= count.
std::vector<std::size_t> sample_indices(std::size_t count, std::size_t n, std::uint64_t seed);

PointCloud subsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

/// Exact nearest-neighbour search. Ties resolve to the lowest point index.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& points);

  struct Hit {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };
  [[nodiscard]] Hit nearest(const Vec3& query) const;
  [[nodiscard]] std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = -1;
    double split = 0.0;
  };
  int build(std::uint32_t begin, std::uint32_t end);
  void search(int node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

/// Least-squares rigid transform mapping src[k] onto dst[k] (Kabsch, with
/// the reflection case corrected so det(R) = +1).
RigidTransform fit_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

/// Throws DegenerateGeometry unless the cloud has >= 3 points spanning at
/// least two dimensions.
void require_non_degenerate(const PointCloud& cloud, const char* what);

struct IcpOptions {
  int max_iter = 20;
  /// Stop once the mean residual improves by less than this.
  double tol = 1e-9;
};

struct IcpResult {
  RigidTransform transform;
  /// Mean Euclidean distance from transformed source points to their
  /// matched target points.
  double residual = 0.0;
  /// correspondences[k] = target index matched to source point k.
  std::vector<std::size_t> correspondences;
  int iterations_used = 0;
  bool converged = false;
  /// Residual after each accepted step, starting with the initial alignment.
  std::vector<double> history;
};

/// Point-to-point ICP from the identity. A step that would raise the
/// residual is rejected and ends the iteration, so `history` never increases.
IcpResult icp(const PointCloud& source, const PointCloud& target, const IcpOptions& opts = {});

/// Nearest target index for every point of `queries`.
std::vector<std::size_t> nearest_indices(const std::vector<Vec3>& queries, const KdTree& tree);

/// Symmetric chamfer distance: the average of the mean source->target and
/// mean target->source nearest distances, after applying `transform`.
double chamfer_distance(const PointCloud& source, const PointCloud& target,
                        const RigidTransform& transform);

// ---------------------------------------------------------------------------
// Geometric consistency loss.
//
// A sample is a pixel of one view (the driver). It yields one point in each
// cloud: the driver pixel lifted with its own disparity, and its stereo
// correspondent lifted from the other view's disparity sampled at the
// correspondent column. For disparity fields describing the same surface the
// two points coincide wherever the other field is linear between pixels,
// exactly so for planes.

struct GeometricConfig {
  std::size_t points = 1000;
  std::uint64_t seed = 0;
  IcpOptions icp;
};

struct StereoSample {
  View driver = View::left;
  PixelIndex pixel;
};

/// Everything held constant while differentiating the loss.
struct GeometricFreeze {
  std::vector<StereoSample> samples;
  RigidTransform transform;
  /// forward[k]: target index matched to source point k.
  std::vector<std::size_t> forward;
  /// backward[m]: source index matched to target point m.
  std::vector<std::size_t> backward;
};

/// One dependency of a cloud point on a disparity value.
struct PointPartial {
  View field = View::left;
  std::size_t index = 0;
  Vec3 d_point;
};

struct StereoClouds {
  PointCloud source;  ///< left-view points
  PointCloud target;  ///< right-view points, in the left camera frame
  std::vector<std::vector<PointPartial>> source_partials;
  std::vector<std::vector<PointPartial>> target_partials;
  /// Samples kept (those whose disparities were all >= kMinDisparity).
  std::vector<StereoSample> samples;
};

/// Draws ceil(n/2) left and floor(n/2) right mask-in pixels.
std::vector<StereoSample> draw_stereo_samples(const DisparityField& dl, const DisparityField& dr,
                                              const BinaryMask& mask_l, const BinaryMask& mask_r,
                                              std::size_t n, std::uint64_t seed);

StereoClouds build_stereo_clouds(const std::vector<StereoSample>& samples,
                                 const DisparityField& dl, const DisparityField& dr,
                                 const CameraRig& rig);

struct GeometricLoss {
  TermValueGrad term;
  GeometricFreeze freeze;
  IcpResult icp;
};

/// Loss value and gradient with samples, transform and correspondences held
/// fixed.
TermValueGrad frozen_geometric_loss(const DisparityField& dl, const DisparityField& dr,
                                    const CameraRig& rig, const GeometricFreeze& freeze);

/// Samples, registers with ICP, then evaluates the symmetric post-alignment
/// chamfer distance and its frozen gradient. Empty or degenerate clouds give
/// a zero term with `empty` set.
GeometricLoss geometric_consistency_loss(const DisparityField& dl, const DisparityField& dr,
                                         const CameraRig& rig, const BinaryMask& mask_l,
                                         const BinaryMask& mask_r, const GeometricConfig& cfg);

}  // namespace m3d
