#include "m3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "m3d/errors.hpp"

namespace m3d {

PointCloud RigidTransform::apply(const PointCloud& cloud) const {
  PointCloud out = cloud;
  for (auto& p : out.points) p = apply(p);
  return out;
}

double RigidTransform::angle() const {
  const Vec3 axis(rotation(2, 1) - rotation(1, 2), rotation(0, 2) - rotation(2, 0),
                  rotation(1, 0) - rotation(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (rotation.trace() - 1.0));
}

bool RigidTransform::is_proper(double tol) const {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Vec3 backproject_point(const CameraRig& rig, View view, double y, double x, double disparity) {
  const double scale = rig.baseline() / disparity;  // Z / f
  Vec3 p((x - rig.cx()) * scale, (y - rig.cy()) * scale, rig.focal() * scale);
  if (view == View::right) p.x() += rig.baseline();
  return p;
}

Backprojection backproject(const DisparityField& d, const CameraRig& rig, const BinaryMask& mask,
                           View view) {
  require_same_size(d.size(), rig.size(), "backproject");
  require_same_size(d.size(), mask.size(), "backproject mask");
  Backprojection out;
  for (int i = 0; i < d.height(); ++i) {
    for (int j = 0; j < d.width(); ++j) {
      if (!mask(i, j)) continue;
      if (d(i, j) < kMinDisparity) {
        ++out.skipped;
        continue;
      }
      out.cloud.points.push_back(backproject_point(rig, view, i, j, d(i, j)));
      out.cloud.source_pixel.push_back({i, j});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> sample_with(std::size_t count, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> all(count);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (n >= count) return all;
  std::vector<std::size_t> out;
  out.reserve(n);
  // Selection sampling keeps the ascending order of the input range.
  std::sample(all.begin(), all.end(), std::back_inserter(out), n, rng);
  return out;
}

}  // namespace

std::vector<std::size_t> sample_indices(std::size_t count, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample_indices: n must be >= 1");
  std::mt19937_64 rng(seed);
  return sample_with(count, n, rng);
}

PointCloud subsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  const auto idx = sample_indices(cloud.size(), n, seed);
  PointCloud out;
  out.points.reserve(idx.size());
  const bool with_pixels = cloud.source_pixel.size() == cloud.points.size();
  for (auto k : idx) {
    out.points.push_back(cloud.points[k]);
    if (with_pixels) out.source_pixel.push_back(cloud.source_pixel[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------

KdTree::KdTree(const std::vector<Vec3>& points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / 4 + 1);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

int KdTree::build(std::uint32_t begin, std::uint32_t end) {
  constexpr std::uint32_t kLeafSize = 8;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (auto k = begin; k < end; ++k) {
    lo = lo.cwiseMin(points_[order_[k]]);
    hi = hi.cwiseMax(points_[order_[k]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (auto k = node.begin; k < node.end; ++k) {
      const std::size_t idx = order_[k];
      const double d2 = (points_[idx] - q).squaredNorm();
      if (d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index)) {
        best = {idx, d2};
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, q, best);
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
  if (points_.empty()) throw InvalidArgument("KdTree::nearest on an empty tree");
  Hit best{points_.size(), std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

std::vector<std::size_t> nearest_indices(const std::vector<Vec3>& queries, const KdTree& tree) {
  std::vector<std::size_t> out(queries.size());
  for (std::size_t k = 0; k < queries.size(); ++k) out[k] = tree.nearest(queries[k]).index;
  return out;
}

// ---------------------------------------------------------------------------

RigidTransform fit_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.empty()) {
    throw InvalidArgument("fit_rigid: point lists must be non-empty and of equal length");
  }
  const double inv_n = 1.0 / static_cast<double>(src.size());
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t k = 0; k < src.size(); ++k) {
    cs += src[k];
    cd += dst[k];
  }
  cs *= inv_n;
  cd *= inv_n;
  Mat3 cov = Mat3::Zero();
  for (std::size_t k = 0; k < src.size(); ++k) cov += (src[k] - cs) * (dst[k] - cd).transpose();

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 fix = Mat3::Identity();
  if ((v * u.transpose()).determinant() < 0.0) fix(2, 2) = -1.0;

  RigidTransform t;
  t.rotation = v * fix * u.transpose();
  t.translation = cd - t.rotation * cs;
  return t;
}

void require_non_degenerate(const PointCloud& cloud, const char* what) {
  if (cloud.size() < 3) {
    throw DegenerateGeometry(std::string(what) + ": fewer than 3 points");
  }
  Vec3 mean = Vec3::Zero();
  for (const auto& p : cloud.points) mean += p;
  mean /= static_cast<double>(cloud.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : cloud.points) cov += (p - mean) * (p - mean).transpose();
  const Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(cov, Eigen::EigenvaluesOnly).eigenvalues();
  // ascending: ev(2) largest spread, ev(1) second
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
    throw DegenerateGeometry(std::string(what) + ": points are collinear or coincident");
  }
}

IcpResult icp(const PointCloud& source, const PointCloud& target, const IcpOptions& opts) {
  require_non_degenerate(source, "icp source");
  require_non_degenerate(target, "icp target");
  if (opts.max_iter < 1) throw InvalidArgument("icp: max_iter must be >= 1");

  const KdTree tree(target.points);
  auto match = [&](const RigidTransform& t, std::vector<std::size_t>& corr) {
    corr.resize(source.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < source.size(); ++k) {
      const auto hit = tree.nearest(t.apply(source.points[k]));
      corr[k] = hit.index;
      sum += std::sqrt(hit.squared_distance);
    }
    return sum / static_cast<double>(source.size());
  };

  IcpResult r;
  r.residual = match(r.transform, r.correspondences);
  r.history.push_back(r.residual);

  std::vector<Vec3> matched(source.size());
  std::vector<std::size_t> corr;
  for (int it = 1; it <= opts.max_iter; ++it) {
    r.iterations_used = it;
    for (std::size_t k = 0; k < source.size(); ++k) matched[k] = target.points[r.correspondences[k]];
    const RigidTransform candidate = fit_rigid(source.points, matched);
    const double residual = match(candidate, corr);
    if (residual > r.residual) {
      r.converged = true;
      break;
    }
    const double improvement = r.residual - residual;
    r.transform = candidate;
    r.residual = residual;
    r.correspondences = corr;
    r.history.push_back(residual);
    if (improvement < opts.tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

double chamfer_distance(const PointCloud& source, const PointCloud& target,
                        const RigidTransform& transform) {
  if (source.empty() || target.empty()) return 0.0;
  const PointCloud moved = transform.apply(source);
  const KdTree to_target(target.points);
  const KdTree to_source(moved.points);
  double fwd = 0.0, bwd = 0.0;
  for (const auto& p : moved.points) fwd += std::sqrt(to_target.nearest(p).squared_distance);
  for (const auto& p : target.points) bwd += std::sqrt(to_source.nearest(p).squared_distance);
  return 0.5 * (fwd / static_cast<double>(moved.size()) + bwd / static_cast<double>(target.size()));
}

// ---------------------------------------------------------------------------

std::vector<StereoSample> draw_stereo_samples(const DisparityField& dl, const DisparityField& dr,
                                              const BinaryMask& mask_l, const BinaryMask& mask_r,
                                              std::size_t n, std::uint64_t seed) {
  require_same_size(dl.size(), dr.size(), "draw_stereo_samples");
  require_same_size(dl.size(), mask_l.size(), "draw_stereo_samples mask_l");
  require_same_size(dl.size(), mask_r.size(), "draw_stereo_samples mask_r");
  if (n < 1) throw InvalidArgument("draw_stereo_samples: n must be >= 1");

  std::mt19937_64 rng(seed);
  std::vector<StereoSample> out;
  auto draw = [&](View view, const DisparityField& d, const BinaryMask& mask, std::size_t count) {
    std::vector<PixelIndex> candidates;
    for (int i = 0; i < d.height(); ++i) {
      for (int j = 0; j < d.width(); ++j) {
        if (mask(i, j) && d(i, j) >= kMinDisparity) candidates.push_back({i, j});
      }
    }
    if (candidates.empty() || count == 0) return;
    for (auto k : sample_with(candidates.size(), count, rng)) out.push_back({view, candidates[k]});
  };
  draw(View::left, dl, mask_l, (n + 1) / 2);
  draw(View::right, dr, mask_r, n / 2);
  return out;
}

StereoClouds build_stereo_clouds(const std::vector<StereoSample>& samples,
                                 const DisparityField& dl, const DisparityField& dr,
                                 const CameraRig& rig) {
  require_same_size(dl.size(), dr.size(), "build_stereo_clouds");
  require_same_size(dl.size(), rig.size(), "build_stereo_clouds rig");
  const int w = dl.width();
  const Vec3 shift(rig.baseline(), 0.0, 0.0);
  auto flat = [w](int i, int j) { return static_cast<std::size_t>(i) * w + j; };

  StereoClouds out;
  for (const auto& s : samples) {
    const View driver = s.driver;
    const View other = driver == View::left ? View::right : View::left;
    const DisparityField& own_d = driver == View::left ? dl : dr;
    const DisparityField& other_d = driver == View::left ? dr : dl;
    const int i = s.pixel.row;
    const int j = s.pixel.col;

    const double a = own_d(i, j);
    if (a < kMinDisparity) continue;
    const double x = correspondent_column(driver, j, a);
    const RowSample rs = sample_row(other_d.row(i), x);
    const double xc = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const double ds = rs.value;
    if (ds < kMinDisparity) continue;

    const Vec3 own_p = backproject_point(rig, driver, i, j, a);
    const Vec3 own_unshifted = driver == View::right ? Vec3(own_p - shift) : own_p;
    std::vector<PointPartial> own_partials{{driver, flat(i, j), -own_unshifted / a}};

    const Vec3 other_p = backproject_point(rig, other, i, xc, ds);
    const Vec3 other_unshifted = other == View::right ? Vec3(other_p - shift) : other_p;
    const Vec3 d_ds = -other_unshifted / ds;
    std::vector<PointPartial> other_partials;
    if (rs.in_bounds) {
      const Vec3 d_dx = Vec3(rig.baseline() / ds, 0.0, 0.0) + d_ds * rs.slope;
      other_partials.push_back({driver, flat(i, j), d_dx * coordinate_sign(driver)});
    }
    if (rs.w0 != 0.0) other_partials.push_back({other, flat(i, rs.i0), d_ds * rs.w0});
    if (rs.w1 != 0.0) other_partials.push_back({other, flat(i, rs.i1), d_ds * rs.w1});

    if (driver == View::left) {
      out.source.points.push_back(own_p);
      out.source.source_pixel.push_back({i, j});
      out.source_partials.push_back(std::move(own_partials));
      out.target.points.push_back(other_p);
      out.target.source_pixel.push_back({i, static_cast<int>(std::lround(xc))});
      out.target_partials.push_back(std::move(other_partials));
    } else {
      out.target.points.push_back(own_p);
      out.target.source_pixel.push_back({i, j});
      out.target_partials.push_back(std::move(own_partials));
      out.source.points.push_back(other_p);
      out.source.source_pixel.push_back({i, static_cast<int>(std::lround(xc))});
      out.source_partials.push_back(std::move(other_partials));
    }
    out.samples.push_back(s);
  }
  return out;
}

TermValueGrad frozen_geometric_loss(const DisparityField& dl, const DisparityField& dr,
                                    const CameraRig& rig, const GeometricFreeze& freeze) {
  TermValueGrad out = TermValueGrad::zero(dl.size());
  const StereoClouds clouds = build_stereo_clouds(freeze.samples, dl, dr, rig);
  const std::size_t ns = clouds.source.size();
  const std::size_t nt = clouds.target.size();
  if (ns != freeze.samples.size() || freeze.forward.size() != ns || freeze.backward.size() != nt) {
    throw InvalidArgument("frozen_geometric_loss: freeze does not match the rebuilt clouds");
  }
  if (ns == 0) {
    out.empty = true;
    return out;
  }

  const Mat3& rot = freeze.transform.rotation;
  double scale = 1.0;
  for (const auto& p : clouds.source.points) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  for (const auto& p : clouds.target.points) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  // Below this a match is treated as exact and takes the zero subgradient.
  const double exact = 1e-12 * scale;

  std::vector<Vec3> g_src(ns, Vec3::Zero()), g_tgt(nt, Vec3::Zero());
  std::vector<Vec3> moved(ns);
  for (std::size_t k = 0; k < ns; ++k) moved[k] = freeze.transform.apply(clouds.source.points[k]);

  double fwd = 0.0;
  const double wf = 0.5 / static_cast<double>(ns);
  for (std::size_t k = 0; k < ns; ++k) {
    const Vec3 u = moved[k] - clouds.target.points[freeze.forward[k]];
    const double dist = u.norm();
    fwd += dist;
    if (dist <= exact) continue;
    const Vec3 unit = u / dist;
    g_src[k] += wf * (rot.transpose() * unit);
    g_tgt[freeze.forward[k]] -= wf * unit;
  }
  double bwd = 0.0;
  const double wb = 0.5 / static_cast<double>(nt);
  for (std::size_t m = 0; m < nt; ++m) {
    const Vec3 u = clouds.target.points[m] - moved[freeze.backward[m]];
    const double dist = u.norm();
    bwd += dist;
    if (dist <= exact) continue;
    const Vec3 unit = u / dist;
    g_tgt[m] += wb * unit;
    g_src[freeze.backward[m]] -= wb * (rot.transpose() * unit);
  }
  out.value = 0.5 * (fwd / static_cast<double>(ns) + bwd / static_cast<double>(nt));

  auto scatter = [&](const std::vector<std::vector<PointPartial>>& partials,
                     const std::vector<Vec3>& grads) {
    for (std::size_t k = 0; k < partials.size(); ++k) {
      for (const auto& pp : partials[k]) {
        out.grad(pp.field).values()[pp.index] += grads[k].dot(pp.d_point);
      }
    }
  };
  scatter(clouds.source_partials, g_src);
  scatter(clouds.target_partials, g_tgt);
  return out;
}

GeometricLoss geometric_consistency_loss(const DisparityField& dl, const DisparityField& dr,
                                         const CameraRig& rig, const BinaryMask& mask_l,
                                         const BinaryMask& mask_r, const GeometricConfig& cfg) {
  GeometricLoss out{TermValueGrad::zero(dl.size()), {}, {}};
  // Either cloud empty after masking gives an empty term, even though the
  // other view's samples alone could still produce both points.
  auto has_points = [](const DisparityField& d, const BinaryMask& m) {
    for (std::size_t k = 0; k < d.values().size(); ++k) {
      if (m.bits()[k] && d.values()[k] >= kMinDisparity) return true;
    }
    return false;
  };
  require_same_size(dl.size(), mask_l.size(), "geometric_consistency_loss mask_l");
  require_same_size(dr.size(), mask_r.size(), "geometric_consistency_loss mask_r");
  if (!has_points(dl, mask_l) || !has_points(dr, mask_r)) {
    out.term.empty = true;
    return out;
  }
  const auto samples = draw_stereo_samples(dl, dr, mask_l, mask_r, cfg.points, cfg.seed);
  const StereoClouds clouds = build_stereo_clouds(samples, dl, dr, rig);
  if (clouds.source.empty()) {
    out.term.empty = true;
    return out;
  }
  try {
    out.icp = icp(clouds.source, clouds.target, cfg.icp);
  } catch (const DegenerateGeometry&) {
    out.term.empty = true;
    return out;
  }
  const PointCloud moved = out.icp.transform.apply(clouds.source);
  out.freeze.samples = clouds.samples;
  out.freeze.transform = out.icp.transform;
  out.freeze.forward = out.icp.correspondences;
  out.freeze.backward = nearest_indices(clouds.target.points, KdTree(moved.points));
  out.term = frozen_geometric_loss(dl, dr, rig, out.freeze);
  return out;
}

}  // namespace m3d
