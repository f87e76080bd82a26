#include "doctest.h"
#include "gradient_checks.hpp"
#include "m3d/errors.hpp"
#include "m3d/photometric.hpp"
#include "support.hpp"

using namespace m3d;

namespace {

bool same_field(const ScalarField& a, const ScalarField& b) {
  return std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

ImagePlane replace_outside(const ImagePlane& img, const BinaryMask& mask, std::uint64_t seed) {
  const ImagePlane noise = test::random_image(img.height(), img.width(), img.channels(), seed);
  std::vector<double> v(img.data().begin(), img.data().end());
  for (int i = 0; i < img.height(); ++i) {
    for (int j = 0; j < img.width(); ++j) {
      if (mask(i, j)) continue;
      for (int c = 0; c < img.channels(); ++c) v[(static_cast<std::size_t>(i) * img.width() + j) * img.channels() + c] = noise(i, j, c);
    }
  }
  return ImagePlane(img.height(), img.width(), img.channels(), std::move(v));
}

}  // namespace

TEST_CASE("ssim of identical images is one") {
  const ImagePlane a = test::random_image(6, 8, 3, 1);
  const ScalarField s = ssim_map(a, a);
  for (double v : s.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("ssim of constant images has the closed form") {
  const SsimParams p;
  for (auto [u, v] : {std::pair{0.2, 0.7}, {0.5, 0.5}, {0.9, 0.1}, {0.0, 1.0}}) {
    const ScalarField s = ssim_map(ImagePlane::filled(5, 6, 3, u), ImagePlane::filled(5, 6, 3, v), p);
    const double expected = (2 * u * v + p.c1) / (u * u + v * v + p.c1);
    for (double x : s.values()) CHECK(x == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("ssim of an image and its negative stays below one") {
  const ImagePlane a = test::random_image(7, 9, 1, 2);
  std::vector<double> inv;
  for (double x : a.data()) inv.push_back(1.0 - x);
  const ScalarField s = ssim_map(a, ImagePlane(7, 9, 1, inv));
  for (double v : s.values()) {
    CHECK(v < 1.0);
    CHECK(v >= -1.0);
  }
}

TEST_CASE("ssim parameters are validated") {
  const ImagePlane a = test::random_image(4, 4, 1, 3);
  CHECK_THROWS_AS(ssim_map(a, a, SsimParams{4, 1e-4, 9e-4}), InvalidArgument);
  CHECK_THROWS_AS(ssim_map(a, a, SsimParams{3, 0.0, 9e-4}), InvalidArgument);
  CHECK_THROWS_AS(ssim_map(a, test::random_image(4, 5, 1, 3)), InvalidArgument);
  CHECK_THROWS_AS(ssim_map(a, test::random_image(4, 4, 3, 3)), InvalidArgument);
}

TEST_CASE("appearance loss of a perfect reconstruction is zero") {
  const ImagePlane a = test::random_image(6, 8, 3, 4);
  const WarpResult same = warp_horizontal(a, DisparityField::constant(6, 8, 0.0), WarpDirection::toward_left);
  const BinaryMask half(6, 8, std::vector<std::uint8_t>(48, 0));
  for (double gamma : {0.0, 0.5, 0.85, 1.0}) {
    CHECK(std::abs(appearance_loss(a, same, BinaryMask::ones(6, 8), gamma).value) < 1e-15);
  }
  const TermValueGrad empty = appearance_loss(a, same, half, 0.85);
  CHECK(empty.empty);
  CHECK(empty.value == 0.0);
  CHECK(empty.grad_dl.norm() == 0.0);
}

TEST_CASE("appearance loss with gamma zero is the masked mean absolute difference") {
  const ImagePlane a = test::random_image(5, 7, 3, 5);
  const ImagePlane b = test::random_image(5, 7, 3, 6);
  const DisparityField d = test::random_disparity(5, 7, 0.0, 2.0, 7);
  const WarpResult r = warp_horizontal(b, d, WarpDirection::toward_left);
  const BinaryMask m = blind_mask(d, View::left);
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 7; ++j) {
      if (!m(i, j)) continue;
      double l1 = 0.0;
      for (int c = 0; c < 3; ++c) l1 += std::abs(a(i, j, c) - r.reconstructed(i, j, c));
      sum += l1 / 3.0;
    }
  }
  CHECK(appearance_loss(a, r, m, 0.0).value == doctest::Approx(sum / m.count()).epsilon(1e-14));
}

TEST_CASE("appearance gradient matches central differences on small pairs") {
  // 8x10 pair from the examples plus the 16x20 instances of the gradient suite.
  const ImagePlane a = test::random_image(8, 10, 3, 8);
  const ImagePlane b = test::smooth_image(8, 10, 3, 9);
  const DisparityField d = test::random_disparity(8, 10, 0.3, 3.0, 10);
  const BinaryMask m = blind_mask(d, View::right);
  const TermValueGrad g = appearance_loss(a, warp_horizontal(b, d, WarpDirection::toward_right), m, 0.85);
  CHECK(g.grad_dl.norm() == 0.0);
  for (std::size_t k = 0; k < 80; ++k) {
    const double x = static_cast<double>(k % 10) + d.values()[k];
    if (test::frac_distance(x) < 1e-3) continue;
    auto f = [&](double v) {
      return appearance_loss(a, warp_horizontal(b, test::with_value(d, k, v), WarpDirection::toward_right), m, 0.85).value;
    };
    CHECK(test::relative_error(g.grad_dr.values()[k], test::central_difference(f, d.values()[k])) < 1e-4);
  }
  for (std::uint64_t s = 0; s < 2; ++s) CHECK(test::check_appearance_gradient(s, 20).worst < 1e-4);
}

TEST_CASE("appearance loss ignores content outside the mask") {
  const ImagePlane a = test::random_image(6, 9, 3, 11);
  const ImagePlane b = test::smooth_image(6, 9, 3, 12);
  const DisparityField d = test::random_disparity(6, 9, 0.5, 3.0, 13);
  const BinaryMask m = blind_mask(d, View::left);
  const TermValueGrad g1 = appearance_loss(a, warp_horizontal(b, d, WarpDirection::toward_left), m, 0.85);
  const TermValueGrad g2 = appearance_loss(replace_outside(a, m, 14), warp_horizontal(b, d, WarpDirection::toward_left), m, 0.85);
  CHECK(g1.value == g2.value);
  CHECK(same_field(g1.grad_dl, g2.grad_dl));
}

TEST_CASE("lr consistency examples") {
  const BinaryMask ones = BinaryMask::ones(4, 12);
  const auto c = DisparityField::constant(4, 12, 2.0);
  // Interior masks keep every sample inside the image.
  std::vector<std::uint8_t> interior(48, 0);
  for (int i = 0; i < 4; ++i) for (int j = 4; j < 8; ++j) interior[i * 12 + j] = 1;
  const BinaryMask in(4, 12, interior);
  const LrConsistency zero = lr_consistency_loss(c, c, in, in);
  CHECK(zero.left.value == 0.0);
  CHECK(zero.right.value == 0.0);

  const double eps = 0.25;
  const LrConsistency off = lr_consistency_loss(c, DisparityField::constant(4, 12, 2.0 + eps), in, in);
  CHECK(off.left.value == doctest::Approx(eps).epsilon(1e-14));
  CHECK(off.right.value == doctest::Approx(eps).epsilon(1e-14));
  CHECK(lr_consistency_loss(c, c, ones, ones).left.value >= 0.0);
}

TEST_CASE("lr gradient matches central differences") {
  for (std::uint64_t s = 0; s < 2; ++s) CHECK(test::check_lr_gradient(s, 25).worst < 1e-4);
}

TEST_CASE("lr term ignores its own field outside the mask") {
  const DisparityField dl = test::random_disparity(5, 10, 0.5, 4.0, 15);
  const DisparityField dr = test::random_disparity(5, 10, 0.5, 4.0, 16);
  const BinaryMask ml = blind_mask(dl, View::left);
  std::vector<double> v(dl.values().begin(), dl.values().end());
  for (std::size_t k = 0; k < v.size(); ++k) if (!ml.bits()[k]) v[k] = 7.0;
  const TermValueGrad a = lr_consistency_term(View::left, dl, dr, ml);
  const TermValueGrad b = lr_consistency_term(View::left, DisparityField(5, 10, v), dr, ml);
  CHECK(a.value == b.value);
  CHECK(same_field(a.grad_dr, b.grad_dr));
}

TEST_CASE("smoothness examples") {
  const ImagePlane img = test::random_image(5, 6, 3, 17);
  CHECK(smoothness_loss(DisparityField::constant(5, 6, 3.0), img).value == 0.0);

  std::vector<double> ramp;
  for (int i = 0; i < 5; ++i) for (int j = 0; j < 6; ++j) ramp.push_back(j);
  const DisparityField dx(5, 6, ramp);
  CHECK(smoothness_loss(dx, ImagePlane::filled(5, 6, 3, 0.4)).value == doctest::Approx(1.0).epsilon(1e-15));

  // Step in d aligned with a step in the image is cheaper than over a flat image.
  std::vector<double> step_d, step_i;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 6; ++j) {
      step_d.push_back(j < 3 ? 1.0 : 4.0);
      step_i.push_back(j < 3 ? 0.1 : 0.9);
    }
  }
  const DisparityField sd(5, 6, step_d);
  const double edge = smoothness_loss(sd, ImagePlane(5, 6, 1, step_i)).value;
  const double flat = smoothness_loss(sd, ImagePlane::filled(5, 6, 1, 0.5)).value;
  CHECK(edge < flat);
  CHECK(edge > 0.0);
}

TEST_CASE("smoothness gradient matches central differences") {
  for (std::uint64_t s = 0; s < 2; ++s) CHECK(test::check_smoothness_gradient(s, 25).worst < 1e-4);
}

TEST_CASE("smoothness ignores image content outside the mask") {
  const DisparityField d = test::random_disparity(6, 8, 0.0, 3.0, 18);
  const ImagePlane img = test::random_image(6, 8, 3, 19);
  const BinaryMask m = blind_mask(d, View::left);
  const TermValueGrad a = smoothness_loss(d, img, View::left, m);
  const TermValueGrad b = smoothness_loss(d, replace_outside(img, m, 20), View::left, m);
  CHECK(a.value == b.value);
  CHECK(same_field(a.grad_dl, b.grad_dl));
  CHECK(a.value >= 0.0);
}
