#include <numeric>
#include <set>

#include <Eigen/LU>

#include "doctest.h"
#include "gradient_checks.hpp"
#include "m3d/errors.hpp"
#include "m3d/geometry.hpp"
#include "m3d/synthetic.hpp"
#include "support.hpp"

using namespace m3d;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud c;
  for (std::size_t k = 0; k < n; ++k) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

double extent(const PointCloud& c) {
  Vec3 lo = c.points.front(), hi = lo;
  for (const auto& p : c.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

PointCloud transformed(const PointCloud& c, const Mat3& r, const Vec3& t) {
  PointCloud out;
  for (const auto& p : c.points) out.points.push_back(r * p + t);
  return out;
}

}  // namespace

TEST_CASE("backprojection examples") {
  const CameraRig rig(50.0, 9.0, 7.0, 2.0, 20, 16);
  const double z = 25.0, d = 2.0 * 50.0 / z;
  const Vec3 axis = backproject_point(rig, View::left, 7.0, 9.0, d);
  CHECK(axis.x() == 0.0);
  CHECK(axis.y() == 0.0);
  CHECK(axis.z() == doctest::Approx(z).epsilon(1e-15));

  const CameraRig wide(5.0, 4.0, 3.0, 2.0, 12, 8);
  const Vec3 side = backproject_point(wide, View::left, 3.0, 9.0, 2.0 * 5.0 / z);
  CHECK(side.x() == doctest::Approx(z).epsilon(1e-15));
  CHECK(side.y() == 0.0);
  CHECK(side.z() == doctest::Approx(z).epsilon(1e-15));

  const Vec3 right = backproject_point(rig, View::right, 7.0, 9.0, d);
  CHECK(right.x() == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("consistent plane clouds coincide after the baseline shift") {
  const int h = 6, w = 14;
  const double disp = 4.0;
  const CameraRig rig(30.0, 6.5, 2.5, 1.5, w, h);
  const DisparityField d = DisparityField::constant(h, w, disp);
  const Backprojection left = backproject(d, rig, blind_mask(d, View::left), View::left);
  const Backprojection right = backproject(d, rig, blind_mask(d, View::right), View::right);
  REQUIRE(left.cloud.size() == static_cast<std::size_t>(h * (w - 4)));
  REQUIRE(right.cloud.size() == left.cloud.size());
  // Left pixel (i, j) and right pixel (i, j - 4) see the same surface point.
  for (std::size_t k = 0; k < left.cloud.size(); ++k) {
    const PixelIndex pl = left.cloud.source_pixel[k];
    const auto it = std::find(right.cloud.source_pixel.begin(), right.cloud.source_pixel.end(),
                              PixelIndex{pl.row, pl.col - 4});
    REQUIRE(it != right.cloud.source_pixel.end());
    const Vec3 pr = right.cloud.points[static_cast<std::size_t>(it - right.cloud.source_pixel.begin())];
    CHECK((left.cloud.points[k] - pr).norm() < 1e-9);
  }
}

TEST_CASE("backprojection skips sub-epsilon disparities") {
  const CameraRig rig(10.0, 1.0, 0.0, 1.0, 3, 1);
  const Backprojection b = backproject(DisparityField(1, 3, {1.0, 0.0, 1e-9}), rig, BinaryMask::ones(1, 3), View::left);
  CHECK(b.cloud.size() == 1);
  CHECK(b.skipped == 2);
  CHECK(b.cloud.source_pixel[0] == PixelIndex{0, 0});
  const Backprojection none = backproject(DisparityField(1, 3, {1.0, 2.0, 3.0}), rig, BinaryMask::zeros(1, 3), View::left);
  CHECK(none.cloud.empty());
}

TEST_CASE("subsample contracts") {
  const PointCloud small = random_cloud(30, 1);
  const PointCloud all = subsample(small, 30, 5);
  REQUIRE(all.size() == 30);
  for (std::size_t k = 0; k < 30; ++k) CHECK(all.points[k] == small.points[k]);
  CHECK(subsample(small, 100, 5).size() == 30);
  CHECK(subsample(PointCloud{}, 10, 5).empty());

  const auto a = sample_indices(50000, 1000, 42);
  const auto b = sample_indices(50000, 1000, 42);
  CHECK(a == b);
  CHECK(a.size() == 1000);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 1000);
  CHECK(a.back() < 50000);
  CHECK(sample_indices(50000, 1000, 43) != a);
}

TEST_CASE("subsample mean approaches the cloud centroid") {
  const PointCloud cloud = random_cloud(5000, 2);
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : cloud.points) centroid += p;
  centroid /= 5000.0;
  const int seeds = 200;
  const std::size_t n = 100;
  Vec3 mean = Vec3::Zero();
  for (int s = 0; s < seeds; ++s) {
    const PointCloud sub = subsample(cloud, n, static_cast<std::uint64_t>(s));
    for (const auto& p : sub.points) mean += p;
  }
  mean /= static_cast<double>(seeds * n);
  // Uniform on [-1, 1]: sigma = 1/sqrt(3) per coordinate.
  const double band = 3.0 / std::sqrt(3.0) / std::sqrt(static_cast<double>(seeds * n));
  for (int c = 0; c < 3; ++c) CHECK(std::abs(mean[c] - centroid[c]) < band);
}

TEST_CASE("kd tree agrees with brute force and breaks ties by index") {
  const PointCloud cloud = random_cloud(400, 3);
  const KdTree tree(cloud.points);
  const PointCloud queries = random_cloud(200, 4);
  for (const auto& q : queries.points) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < cloud.size(); ++k) {
      if ((cloud.points[k] - q).squaredNorm() < (cloud.points[best] - q).squaredNorm()) best = k;
    }
    const auto hit = tree.nearest(q);
    CHECK(hit.index == best);
    CHECK(hit.squared_distance == (cloud.points[best] - q).squaredNorm());
  }
  std::vector<Vec3> dup(40, Vec3(1.0, 2.0, 3.0));
  dup.push_back(Vec3::Zero());
  CHECK(KdTree(dup).nearest(Vec3(1.0, 2.0, 3.5)).index == 0);
}

TEST_CASE("rigid fit corrects reflections") {
  const PointCloud c = random_cloud(20, 5);
  std::vector<Vec3> mirrored;
  for (const auto& p : c.points) mirrored.emplace_back(-p.x(), p.y(), p.z());
  const RigidTransform t = fit_rigid(c.points, mirrored);
  CHECK(t.is_proper());
  CHECK(t.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("icp of a cloud with itself") {
  const PointCloud c = random_cloud(500, 6);
  const IcpResult r = icp(c, c);
  CHECK(r.residual == 0.0);
  CHECK(r.iterations_used == 1);
  CHECK(r.converged);
  CHECK(r.transform.rotation.isApprox(Mat3::Identity(), 1e-12));
  CHECK(r.transform.translation.norm() < 1e-12);
  std::vector<std::size_t> id(500);
  std::iota(id.begin(), id.end(), 0);
  CHECK(r.correspondences == id);
}

TEST_CASE("icp recovers a known rotation and translation") {
  const PointCloud c = random_cloud(1000, 7);
  const double ext = extent(c);
  const Mat3 rot = test::axis_rotation(Vec3::UnitY(), 5.0 * std::numbers::pi / 180.0);
  const Vec3 t = Vec3(0.05, 0.0, 0.02) * ext;
  const IcpResult r = icp(c, transformed(c, rot, t));
  CHECK(test::rotation_angle(r.transform.rotation.transpose() * rot) < 1e-6);
  CHECK((r.transform.translation - t).norm() < 1e-6 * ext);
  CHECK(r.residual < 1e-9);
  CHECK(r.transform.is_proper());
  CHECK(std::is_sorted(r.history.rbegin(), r.history.rend()));
}

TEST_CASE("icp between interleaved planes keeps a positive residual") {
  // Target alternates between z = 0 and z = 0.1 in a checkerboard; the source
  // is the full grid halfway between, so every point starts 0.05 away.
  PointCloud src, tgt;
  const double s = 0.2;
  for (int a = 0; a < 20; ++a) {
    for (int b = 0; b < 20; ++b) {
      src.points.emplace_back(a * s, b * s, 0.05);
      tgt.points.emplace_back(a * s, b * s, (a + b) % 2 == 0 ? 0.0 : 0.1);
    }
  }
  const IcpResult r = icp(src, tgt, {50, 1e-12});
  CHECK(r.history.front() == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(r.residual > 0.01);
  CHECK(r.residual <= r.history.front());
  CHECK(std::is_sorted(r.history.rbegin(), r.history.rend()));
}

TEST_CASE("icp rejects degenerate clouds") {
  PointCloud line;
  for (int k = 0; k < 10; ++k) line.points.emplace_back(k, 2.0 * k, 0.0);
  const PointCloud c = random_cloud(10, 8);
  CHECK_THROWS_AS(icp(line, c), DegenerateGeometry);
  CHECK_THROWS_AS(icp(c, line), DegenerateGeometry);
  PointCloud two;
  two.points = {Vec3::Zero(), Vec3::UnitX()};
  CHECK_THROWS_AS(icp(two, c), DegenerateGeometry);
}

TEST_CASE("chamfer distance ignores point order") {
  const PointCloud a = random_cloud(300, 9);
  const PointCloud b = random_cloud(250, 10);
  RigidTransform t;
  t.rotation = test::axis_rotation(Vec3(1, 2, 3), 0.1);
  t.translation = Vec3(0.1, -0.2, 0.05);
  PointCloud pa = a, pb = b;
  std::mt19937_64 rng(11);
  std::shuffle(pa.points.begin(), pa.points.end(), rng);
  std::shuffle(pb.points.begin(), pb.points.end(), rng);
  CHECK(chamfer_distance(pa, pb, t) == doctest::Approx(chamfer_distance(a, b, t)).epsilon(1e-13));
  CHECK(chamfer_distance(a, a, RigidTransform::identity()) == 0.0);
}

TEST_CASE("geometric loss vanishes on consistent planar surfaces") {
  for (std::string preset : {"plane", "slant", "slant-occluded"}) {
    CAPTURE(preset);
    const SyntheticScene scene = synth_scene(scene_preset(preset, 16, 20), 1);
    const GeometricLoss g = geometric_consistency_loss(scene.gt_dl, scene.gt_dr, scene.rig, scene.covisible_l,
                                                       scene.covisible_r, GeometricConfig{});
    CHECK_FALSE(g.term.empty);
    CHECK(g.term.value < 1e-9);
    if (preset == "plane") CHECK(g.term.grad_dl.norm() + g.term.grad_dr.norm() < 1e-6);
  }
}

TEST_CASE("curved relief leaves only an interpolation residual that shrinks with resolution") {
  // Disparity of the other view is read between pixels by linear
  // interpolation, which is exact only where the surface is planar.
  double previous = 0.0;
  for (auto [h, w] : {std::pair{16, 20}, {64, 80}, {128, 160}}) {
    const SyntheticScene scene = synth_scene(scene_preset("relief", h, w), 1);
    const double loss = geometric_consistency_loss(scene.gt_dl, scene.gt_dr, scene.rig, scene.covisible_l,
                                                   scene.covisible_r, GeometricConfig{}).term.value;
    std::vector<double> v(scene.gt_dl.values().begin(), scene.gt_dl.values().end());
    for (auto& x : v) x *= 1.02;
    const double scaled = geometric_consistency_loss(DisparityField(h, w, v), scene.gt_dr, scene.rig,
                                                     scene.covisible_l, scene.covisible_r, GeometricConfig{}).term.value;
    CHECK(loss < 0.3 * scaled);
    if (previous > 0.0) CHECK(loss < 0.25 * previous);
    previous = loss;
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("geometric gradient is a descent direction for a scale error") {
  const SyntheticScene scene = synth_scene(scene_preset("plane", 16, 20), 2);
  std::vector<double> v(scene.gt_dl.values().begin(), scene.gt_dl.values().end());
  for (auto& x : v) x *= 1.02;
  const DisparityField dl(16, 20, v);
  const BinaryMask ml = blind_mask(dl, View::left), mr = blind_mask(scene.gt_dr, View::right);
  const GeometricLoss g = geometric_consistency_loss(dl, scene.gt_dr, scene.rig, ml, mr, GeometricConfig{});
  REQUIRE(g.term.value > 0.0);
  const double norm = std::sqrt(g.term.grad_dl.norm() * g.term.grad_dl.norm() +
                                g.term.grad_dr.norm() * g.term.grad_dr.norm());
  REQUIRE(norm > 0.0);
  auto step = [&](const DisparityField& d, const ScalarField& grad) {
    std::vector<double> out(d.values().begin(), d.values().end());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] -= 1e-4 * grad.values()[k] / norm;
    return DisparityField(d.height(), d.width(), std::move(out));
  };
  const DisparityField dl2 = step(dl, g.term.grad_dl), dr2 = step(scene.gt_dr, g.term.grad_dr);
  CHECK(frozen_geometric_loss(dl2, dr2, scene.rig, g.freeze).value < g.term.value);
  CHECK(geometric_consistency_loss(dl2, dr2, scene.rig, ml, mr, GeometricConfig{}).term.value < g.term.value);
}

TEST_CASE("frozen loss matches the independent oracle and central differences") {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const test::GeometricInstance g = test::geometric_instance(s);
    CHECK(g.loss.term.value == doctest::Approx(test::frozen_loss_oracle(g.dl, g.dr, g.rig, g.loss.freeze)).epsilon(1e-12));
    CHECK(test::check_geometric_gradient(s, 20).worst < 1e-4);
  }
}

TEST_CASE("geometric loss with an empty mask is flagged and zero") {
  const SyntheticScene scene = synth_scene(scene_preset("plane", 16, 20), 3);
  const GeometricLoss g = geometric_consistency_loss(scene.gt_dl, scene.gt_dr, scene.rig, BinaryMask::zeros(16, 20),
                                                     scene.covisible_r, GeometricConfig{});
  CHECK(g.term.empty);
  CHECK(g.term.value == 0.0);
  CHECK(g.term.grad_dl.norm() == 0.0);
  CHECK(g.term.grad_dr.norm() == 0.0);
}

TEST_CASE("stereo samples are deterministic and split between views") {
  const SyntheticScene scene = synth_scene(scene_preset("slant", 16, 20), 4);
  const auto a = draw_stereo_samples(scene.gt_dl, scene.gt_dr, scene.covisible_l, scene.covisible_r, 101, 9);
  const auto b = draw_stereo_samples(scene.gt_dl, scene.gt_dr, scene.covisible_l, scene.covisible_r, 101, 9);
  REQUIRE(a.size() == b.size());
  std::size_t left = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].pixel == b[k].pixel);
    CHECK(a[k].driver == b[k].driver);
    const BinaryMask& m = a[k].driver == View::left ? scene.covisible_l : scene.covisible_r;
    CHECK(m(a[k].pixel.row, a[k].pixel.col));
    left += a[k].driver == View::left ? 1 : 0;
  }
  CHECK(a.size() == 101);
  CHECK(left == 51);
}
