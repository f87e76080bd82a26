#include <bit>
#include <set>

#include "doctest.h"
#include "m3d/errors.hpp"
#include "m3d/structured_light.hpp"
#include "support.hpp"

using namespace m3d;

namespace {

// Camera row j sees projector column j directly.
ScalarField identity_columns(int width) {
  std::vector<double> v(static_cast<std::size_t>(width));
  for (int j = 0; j < width; ++j) v[static_cast<std::size_t>(j)] = j;
  return ScalarField(1, width, std::move(v));
}

ScalarField phase_sweep(int n, double lo, double hi) {
  std::vector<double> v;
  for (int k = 0; k < n; ++k) v.push_back(lo + (hi - lo) * k / (n - 1));
  return ScalarField(1, n, std::move(v));
}

std::uint32_t reflected_gray(std::uint32_t b) {
  // Written out bit by bit: gray bit k = b_k xor b_(k+1).
  std::uint32_t g = 0;
  for (int k = 0; k < 31; ++k) g |= (((b >> k) ^ (b >> (k + 1))) & 1u) << k;
  return g;
}

}  // namespace

TEST_CASE("gray code arithmetic") {
  for (std::uint32_t b = 0; b < 4096; ++b) {
    CHECK(binary_to_gray(b) == reflected_gray(b));
    CHECK(gray_to_binary(binary_to_gray(b)) == b);
    if (b > 0) CHECK(std::popcount(binary_to_gray(b) ^ binary_to_gray(b - 1)) == 1);
  }
}

TEST_CASE("pattern generation examples") {
  const GrayCodeSet eight = generate_gray_patterns(8);
  CHECK(eight.bit_count == 3);
  CHECK(eight.patterns.size() == 3);
  CHECK(eight.inverses.size() == 3);
  CHECK(eight.codeword(5) == 0b111u);
  for (int k = 0; k < 3; ++k) CHECK(eight.patterns[k][5] == 1);

  const GrayCodeSet two = generate_gray_patterns(2);
  CHECK(two.bit_count == 1);
  CHECK(two.patterns[0] == std::vector<std::uint8_t>{0, 1});
  CHECK(two.inverses[0] == std::vector<std::uint8_t>{1, 0});

  CHECK(generate_gray_patterns(100).bit_count == 7);
  CHECK(generate_gray_patterns(1024).bit_count == 10);
  CHECK(generate_gray_patterns(1025).bit_count == 11);
  CHECK_THROWS_AS(generate_gray_patterns(1), InvalidArgument);
}

TEST_CASE("codewords are unique") {
  for (int width : {8, 64, 100, 1024}) {
    const GrayCodeSet set = generate_gray_patterns(width);
    std::set<std::uint32_t> seen;
    for (int c = 0; c < width; ++c) {
      std::uint32_t word = 0;
      for (int k = 0; k < set.bit_count; ++k) {
        word = (word << 1) | set.patterns[k][static_cast<std::size_t>(c)];
        CHECK(set.inverses[k][static_cast<std::size_t>(c)] == 1 - set.patterns[k][static_cast<std::size_t>(c)]);
      }
      CHECK(word == set.codeword(c));
      seen.insert(word);
    }
    CHECK(seen.size() == static_cast<std::size_t>(width));
  }
}

TEST_CASE("render then decode is the identity on projector columns") {
  for (int width : {8, 64, 100, 1024}) {
    const GrayCodeSet set = generate_gray_patterns(width);
    const GrayCaptures caps = render_gray_captures(identity_columns(width), set);
    const CorrespondenceMap m = decode_gray(caps.captures, caps.inverse_captures, width);
    CHECK(m.certain.count() == static_cast<std::size_t>(width));
    for (int j = 0; j < width; ++j) CHECK(m.at(0, j) == j);
  }
}

TEST_CASE("decode flags ambiguous and unlit pixels") {
  const GrayCodeSet set = generate_gray_patterns(16);
  const GrayCaptures caps = render_gray_captures(identity_columns(16), set);
  const CorrespondenceMap same = decode_gray(caps.captures, caps.captures, 16);
  CHECK(same.certain.count() == 0);
  for (int c : same.column) CHECK(c == -1);

  // Columns outside the projector read dark under every pattern.
  const ScalarField outside(1, 3, std::vector<double>{-4.0, 3.0, 40.0});
  const GrayCaptures oc = render_gray_captures(outside, set);
  const CorrespondenceMap om = decode_gray(oc.captures, oc.inverse_captures, 16);
  CHECK(om.certain == BinaryMask(1, 3, {0, 1, 0}));
  CHECK(om.at(0, 1) == 3);

  CHECK_THROWS_AS(decode_gray(caps.captures, {caps.inverse_captures.begin(), caps.inverse_captures.end() - 1}, 16),
                  InvalidArgument);
  CHECK_THROWS_AS(decode_gray(caps.captures, caps.inverse_captures, 8), InvalidArgument);
}

TEST_CASE("injected bit flips corrupt exactly the affected pixels") {
  const int width = 64;
  const GrayCodeSet set = generate_gray_patterns(width);
  GrayCaptures caps = render_gray_captures(identity_columns(width), set);
  const std::set<int> flipped{3, 17, 40, 63};
  std::mt19937_64 rng(1);
  for (int j : flipped) {
    const auto k = static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(set.bit_count));
    std::vector<double> a(caps.captures[k].data().begin(), caps.captures[k].data().end());
    std::vector<double> b(caps.inverse_captures[k].data().begin(), caps.inverse_captures[k].data().end());
    std::swap(a[static_cast<std::size_t>(j)], b[static_cast<std::size_t>(j)]);
    caps.captures[k] = ImagePlane(1, width, 1, std::move(a));
    caps.inverse_captures[k] = ImagePlane(1, width, 1, std::move(b));
  }
  const CorrespondenceMap m = decode_gray(caps.captures, caps.inverse_captures, width);
  for (int j = 0; j < width; ++j) {
    const bool wrong = !m.certain(0, j) || m.at(0, j) != j;
    CHECK(wrong == (flipped.count(j) == 1));
  }
}

TEST_CASE("modulation depth examples") {
  const ImagePlane flat = ImagePlane::filled(3, 4, 1, 0.4);
  const ModulationResult none = modulation_depth({flat, flat, flat});
  for (double t : none.t.values()) CHECK(t == 0.0);
  CHECK(none.certain.count() == 0);

  const double a = 0.3;
  const PhasePatternSet p = render_phase_captures(phase_sweep(1000, 0.0, 2.0 * std::numbers::pi), 0.5, a,
                                                  PhasePatternSet{}.phase_shifts);
  const ModulationResult r = modulation_depth(p);
  for (double t : r.t.values()) CHECK(test::relative_error(t, 2.0 * a) < 1e-9);
  CHECK(r.certain.count() == 1000);
}

TEST_CASE("the literal pi/3 shifts make T depend on phase") {
  const std::array<double, 3> literal{0.0, std::numbers::pi / 3.0, 2.0 * std::numbers::pi / 3.0};
  const ModulationResult r = modulation_depth(render_phase_captures(phase_sweep(1000, 0.0, 2.0 * std::numbers::pi), 0.5, 0.3, literal));
  const auto [lo, hi] = std::minmax_element(r.t.values().begin(), r.t.values().end());
  CHECK(*hi - *lo > 0.1);
}

TEST_CASE("modulation invariants") {
  const ScalarField phase = phase_sweep(200, -3.0, 3.0);
  const auto shifts = PhasePatternSet{}.phase_shifts;
  const ModulationResult base = modulation_depth(render_phase_captures(phase, 0.4, 0.2, shifts));
  const ModulationResult offset = modulation_depth(render_phase_captures(phase, 0.6, 0.2, shifts));
  const ModulationResult doubled = modulation_depth(render_phase_captures(phase, 0.5, 0.4, shifts));
  for (std::size_t k = 0; k < 200; ++k) {
    CHECK(offset.t.values()[k] == doctest::Approx(base.t.values()[k]).epsilon(1e-12));
    CHECK(doubled.t.values()[k] == doctest::Approx(2.0 * base.t.values()[k]).epsilon(1e-12));
  }
  // Random captures: raising the threshold never certifies new pixels.
  PhasePatternSet random{test::random_image(10, 10, 1, 1), test::random_image(10, 10, 1, 2), test::random_image(10, 10, 1, 3)};
  BinaryMask previous = BinaryMask::ones(10, 10);
  for (double th : {0.0, 0.05, 0.2, 0.5, 0.9}) {
    random.threshold = th;
    const BinaryMask m = modulation_depth(random).certain;
    CHECK((m & previous) == m);
    previous = m;
  }
}

TEST_CASE("triangulation recovers depth from noiseless captures") {
  const CameraRig rig(100.0, 31.5, 15.5, 4.0, 64, 32);
  const ProjectorModel proj{100.0, 511.5, 4.0, 1024};
  const GrayCodeSet set = generate_gray_patterns(proj.width);
  auto decode = [&](const DepthMap& depth) {
    const GrayCaptures caps = render_gray_captures(projector_columns(depth, rig, proj), set);
    return decode_gray(caps.captures, caps.inverse_captures, proj.width);
  };

  // bf / Z = 8 px, so every camera pixel lands on a projector column centre.
  const DepthMap plane = DepthMap::from_values(32, 64, std::vector<double>(32 * 64, 50.0));
  const DepthMap zp = triangulate(decode(plane), rig, proj);
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 64; ++j) {
      REQUIRE(zp.valid(i, j));
      CHECK(test::relative_error(zp(i, j), 50.0) < 1e-6);
    }
  }

  // Depth ramp down the rows with integer disparities 4..35.
  std::vector<double> ramp;
  for (int i = 0; i < 32; ++i) for (int j = 0; j < 64; ++j) ramp.push_back(400.0 / (4 + i));
  const DepthMap zr = triangulate(decode(DepthMap::from_values(32, 64, ramp)), rig, proj);
  double worst = 0.0;
  for (int i = 0; i < 32; ++i) for (int j = 0; j < 64; ++j) worst = std::max(worst, test::relative_error(zr(i, j), 400.0 / (4 + i)));
  CHECK(worst < 1e-6);

  CorrespondenceMap none{std::vector<int>(32 * 64, -1), BinaryMask::zeros(32, 64)};
  CHECK(triangulate(none, rig, proj).validity().count() == 0);
}

TEST_CASE("zero column disparity leaves the pixel invalid") {
  const CameraRig rig(10.0, 1.0, 0.0, 1.0, 3, 1);
  const ProjectorModel proj{10.0, 1.0, 1.0, 8};
  // Column 1 everywhere: behind the camera, zero disparity, then depth 10.
  CorrespondenceMap c{{1, 1, 1}, BinaryMask::ones(1, 3)};
  const DepthMap z = triangulate(c, rig, proj);
  CHECK_FALSE(z.valid(0, 1));
  CHECK(z.valid(0, 2));
  CHECK(z(0, 2) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK_FALSE(z.valid(0, 0));
}
