#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "textsynth/homography.hpp"

using namespace textsynth;

namespace {

std::array<Vec2, 4> unit_square(double s = 1.0) {
  return {Vec2{0, 0}, Vec2{s, 0}, Vec2{s, s}, Vec2{0, s}};
}

std::array<Vec2, 4> random_quad(Rng& rng, double lo, double hi) {
  // Corners jittered around a square; regenerate until simple and
  // non-collinear enough.
  while (true) {
    double w = hi - lo;
    std::array<Vec2, 4> q = {
        Vec2{lo + rng.uniform() * w * 0.3, lo + rng.uniform() * w * 0.3},
        Vec2{hi - rng.uniform() * w * 0.3, lo + rng.uniform() * w * 0.3},
        Vec2{hi - rng.uniform() * w * 0.3, hi - rng.uniform() * w * 0.3},
        Vec2{lo + rng.uniform() * w * 0.3, hi - rng.uniform() * w * 0.3}};
    if (Quad{q}.is_simple()) return q;
  }
}

double max_entry_diff(const Homography& a, const Homography& b) {
  double m = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      m = std::max(m, std::abs(a.m[i][j] - b.m[i][j]));
  return m;
}

}  // namespace

TEST_CASE("DLT: identical quads give the identity") {
  auto q = unit_square(10);
  Homography h = homography_from_correspondences(q, q);
  CHECK(max_entry_diff(h, Homography::identity()) < 1e-9);
}

TEST_CASE("DLT: pure shift gives a translation matrix") {
  auto src = unit_square(10);
  std::array<Vec2, 4> dst;
  for (int i = 0; i < 4; ++i) dst[i] = src[i] + Vec2{5, 3};
  Homography h = homography_from_correspondences(src, dst);
  CHECK(max_entry_diff(h, Homography::translation(5, 3)) < 1e-9);
}

TEST_CASE("DLT: random quads reproduce all four correspondences below 1e-9") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    auto src = random_quad(rng, 0, 50);
    auto dst = random_quad(rng, 10, 90);
    Homography h;
    try {
      h = homography_from_correspondences(src, dst);
    } catch (const NumericError&) {
      continue;  // rare near-collinear draw
    }
    for (int i = 0; i < 4; ++i) {
      Vec2 mapped = h.apply(src[i]);
      CHECK(std::hypot(mapped.x - dst[i].x, mapped.y - dst[i].y) < 1e-9);
    }
  }
}

TEST_CASE("DLT: collinear points rejected") {
  std::array<Vec2, 4> src = {Vec2{0, 0}, Vec2{1, 1}, Vec2{2, 2}, Vec2{0, 5}};
  CHECK_THROWS_AS(homography_from_correspondences(src, unit_square()),
                  NumericError);
}

TEST_CASE("random_homography: zero perturbation is the exact identity") {
  Rng rng(7);
  PixelBox bbox{10, 20, 60, 50};
  Homography h = random_homography(rng, bbox, 0.0);
  CHECK(max_entry_diff(h, Homography::identity()) == 0.0);
}

TEST_CASE("random_homography: corners stay within max_perturb * diagonal") {
  Rng rng(8);
  PixelBox bbox{0, 0, 100, 60};
  const double diag = std::hypot(100.0, 60.0);
  for (int trial = 0; trial < 50; ++trial) {
    Homography h = random_homography(rng, bbox, 0.15);
    const std::array<Vec2, 4> corners = {Vec2{0, 0}, Vec2{100, 0},
                                         Vec2{100, 60}, Vec2{0, 60}};
    for (const Vec2& c : corners) {
      Vec2 moved = h.apply(c);
      CHECK(std::hypot(moved.x - c.x, moved.y - c.y) <= 0.15 * diag + 1e-6);
    }
    CHECK(condition_estimate(h) < 1e6);
  }
}

TEST_CASE("random_homography: deterministic per seed") {
  PixelBox bbox{0, 0, 64, 64};
  Rng a(123), b(123);
  Homography ha = random_homography(a, bbox, 0.2);
  Homography hb = random_homography(b, bbox, 0.2);
  CHECK(max_entry_diff(ha, hb) == 0.0);
}

TEST_CASE("random_homography: rejects out-of-range perturbation") {
  Rng rng(1);
  CHECK_THROWS_AS(random_homography(rng, PixelBox{0, 0, 10, 10}, 0.5),
                  InvalidArgument);
}

TEST_CASE("invert: identity and translation") {
  CHECK(max_entry_diff(invert(Homography::identity()),
                       Homography::identity()) == 0.0);
  Homography t = Homography::translation(5, 3);
  CHECK(max_entry_diff(invert(t), Homography::translation(-5, -3)) < 1e-12);
}

TEST_CASE("invert: product with the inverse is the identity within 1e-9") {
  Rng rng(31);
  PixelBox bbox{0, 0, 80, 40};
  for (int trial = 0; trial < 100; ++trial) {
    Homography h = random_homography(rng, bbox, 0.25);
    Homography prod = h * invert(h);
    CHECK(max_entry_diff(prod, Homography::identity()) < 1e-9);
  }
}

TEST_CASE("warp_raster: identity reproduces the input exactly") {
  Rng rng(3);
  RasterImage img(20, 14, 3);
  for (float& v : img.data) v = float(rng.uniform());
  RasterImage out = warp_raster(img, Homography::identity(), 20, 14);
  CHECK(out.data == img.data);
}

TEST_CASE("warp_raster: integer translation shifts a mask and keeps its mass") {
  std::vector<uint8_t> mask(32 * 32, 0);
  for (int y = 10; y < 20; ++y)
    for (int x = 8; x < 22; ++x) mask[y * 32 + x] = 1;
  size_t before = 140;
  auto out = warp_binary_mask(mask, 32, 32, Homography::translation(4, 3), 32, 32);
  size_t after = 0;
  for (uint8_t v : out) after += v;
  CHECK(after == before);
  CHECK(out[(13) * 32 + 12] == 1);  // (8,10) -> (12,13)
  CHECK(out[(10) * 32 + 8] == 0);
}

TEST_CASE("warp_raster: warp then inverse warp of a linear ramp is accurate") {
  // Mean absolute interior error < 0.02 on a smooth gradient image.
  RasterImage ramp(64, 64, 1);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      ramp.at(x, y) = float((x + y) / 126.0);
  Rng rng(17);
  Homography h = random_homography(rng, PixelBox{0, 0, 63, 63}, 0.1);
  RasterImage forward = warp_raster(ramp, h, 64, 64);
  RasterImage back = warp_raster(forward, invert(h), 64, 64);
  double err = 0;
  size_t n = 0;
  for (int y = 8; y < 56; ++y)
    for (int x = 8; x < 56; ++x) {
      err += std::abs(back.at(x, y) - ramp.at(x, y));
      ++n;
    }
  CHECK(err / double(n) < 0.02);
}

TEST_CASE("warp_raster: nearest interpolation picks stored values") {
  RasterImage img(4, 4, 1);
  for (int i = 0; i < 16; ++i) img.data[i] = float(i) / 15.f;
  RasterImage out =
      warp_raster(img, Homography::translation(1, 0), 4, 4, Interp::kNearest);
  CHECK(out.at(1, 0) == img.at(0, 0));
  CHECK(out.at(0, 0) == 0.f);  // out-of-source sample
}

TEST_CASE("quad: area, simplicity, iou") {
  Quad unit{{Vec2{0, 0}, Vec2{10, 0}, Vec2{10, 10}, Vec2{0, 10}}};
  CHECK(unit.area() == doctest::Approx(100.0));
  CHECK(unit.is_simple());
  Quad crossed{{Vec2{0, 0}, Vec2{10, 10}, Vec2{10, 0}, Vec2{0, 10}}};
  CHECK(!crossed.is_simple());

  Quad shifted{{Vec2{5, 0}, Vec2{15, 0}, Vec2{15, 10}, Vec2{5, 10}}};
  double iou = quad_iou(unit, shifted);
  CHECK(iou == doctest::Approx(1.0 / 3.0).epsilon(0.08));
  Quad far{{Vec2{50, 50}, Vec2{60, 50}, Vec2{60, 60}, Vec2{50, 60}}};
  CHECK(quad_iou(unit, far) == 0.0);
}
