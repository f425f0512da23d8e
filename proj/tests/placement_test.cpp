#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "textsynth/placement.hpp"

using namespace textsynth;

namespace {

// Rectangular candidate region with a traced-style boundary.
CandidateRegion rect_candidate(int x0, int y0, int x1, int y1) {
  CandidateRegion cand;
  Region& r = cand.region;
  r.id = 0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      r.pixels.push_back({x, y});
      r.bbox.expand(x, y);
    }
  r.area = r.pixels.size();
  // Clockwise rectangle contour.
  for (int x = x0; x <= x1; ++x) r.boundary.push_back({x, y0});
  for (int y = y0 + 1; y <= y1; ++y) r.boundary.push_back({x1, y});
  for (int x = x1 - 1; x >= x0; --x) r.boundary.push_back({x, y1});
  for (int y = y1 - 1; y > y0; --y) r.boundary.push_back({x0, y});
  cand.score = 1.0;
  cand.dominant_class = "wall";
  return cand;
}

std::vector<Vec2> ellipse_boundary(double cx, double cy, double a, double b,
                                   double angle, int n = 128) {
  std::vector<Vec2> pts;
  double ca = std::cos(angle), sa = std::sin(angle);
  for (int i = 0; i < n; ++i) {
    double t = 2 * M_PI * i / n;
    double ex = a * std::cos(t), ey = b * std::sin(t);
    pts.push_back({cx + ex * ca - ey * sa, cy + ex * sa + ey * ca});
  }
  return pts;
}

}  // namespace

TEST_CASE("fit_placement_edge: wide rectangle gives a horizontal edge of ~W") {
  auto cand = rect_candidate(10, 20, 89, 49);  // 80x30
  OrientedSegment seg = fit_placement_edge(cand.region.boundary);
  CHECK(std::abs(seg.length() - 79.0) <= 2.0);
  Vec2 d = seg.direction();
  CHECK(std::abs(d.y) < 0.05);  // horizontal
  // Interior must lie on the up side.
  Vec2 mid = (seg.a + seg.b) * 0.5 + seg.up * 3.0;
  CHECK(cand.region.bbox.contains(int(mid.x), int(mid.y)));
}

TEST_CASE("fit_placement_edge: near-circular blob falls back to the principal axis") {
  // Small 5:4 ellipse tilted 30 degrees: the largest curvature radius is
  // a^2/b ~ 6.3, so every 2-px-sagitta chord stays under 10 px and the
  // fit must fall back to the covariance eigenvector, which lies exactly
  // along the construction's major axis.
  const double angle = M_PI / 6;
  const double ca = std::cos(angle), sa = std::sin(angle);
  auto boundary = ellipse_boundary(100, 100, 5.0, 4.0, angle, 96);
  OrientedSegment seg = fit_placement_edge(boundary);
  Vec2 d = seg.direction();
  double cosang = std::abs(d.x * ca + d.y * sa);
  CHECK(std::acos(std::min(1.0, cosang)) < 10.0 * M_PI / 180.0);
  // The segment spans roughly the major diameter.
  CHECK(seg.length() > 8.0);
  CHECK(seg.length() < 12.0);
}

TEST_CASE("fit_placement_edge: degenerate boundary rejected") {
  std::vector<Vec2> two = {{0, 0}, {5, 0}};
  CHECK_THROWS_AS(fit_placement_edge(two), InvalidArgument);
}

TEST_CASE("place_text: identity homography on a rectangle is axis-aligned") {
  Font font = Font::load(testutil::dejavu_sans());
  TextMask text = rasterize_text("Pasadena", font, 32);
  auto cand = rect_candidate(20, 30, 179, 99);  // 160x70, wide
  PlacedText placed =
      place_text(cand, Homography::identity(), text, 220, 160);

  // Baseline parallel to the long (horizontal) edge within 0.1 degrees.
  Vec2 top = placed.quad.v[1] - placed.quad.v[0];
  double ang = std::abs(std::atan2(top.y, top.x));
  ang = std::min(ang, std::abs(M_PI - ang));
  CHECK(ang < 0.1 * M_PI / 180.0);

  // Quad stays inside the region bbox (identity warp, contained text).
  for (const Vec2& v : placed.quad.v) {
    CHECK(v.x >= 19.0);
    CHECK(v.x <= 180.0);
    CHECK(v.y >= 29.0);
    CHECK(v.y <= 100.0);
  }
  CHECK(placed.quad.is_simple());
  CHECK(placed.transcript == "Pasadena");
}

TEST_CASE("place_text: quad corners are invert(h) of a fronto-parallel box") {
  Font font = Font::load(testutil::dejavu_sans());
  TextMask text = rasterize_text("Obey", font, 32);
  auto cand = rect_candidate(30, 30, 189, 119);
  Rng rng(5);
  Homography h = random_homography(rng, cand.region.bbox, 0.12);
  PlacedText placed = place_text(cand, h, text, 256, 192);

  // Mapping the quad forward through h must give a perfect rectangle
  // (the fronto-parallel canvas under a similarity): right angles and
  // matching opposite sides, aspect equal to the canvas aspect.
  std::array<Vec2, 4> fr;
  for (int i = 0; i < 4; ++i) fr[i] = h.apply(placed.quad.v[i]);
  Vec2 e0 = fr[1] - fr[0], e1 = fr[2] - fr[1], e2 = fr[3] - fr[2],
       e3 = fr[0] - fr[3];
  CHECK(std::abs(dot(e0, e1)) < 1e-6 * norm(e0) * norm(e1));
  CHECK(std::abs(dot(e1, e2)) < 1e-6 * norm(e1) * norm(e2));
  CHECK(norm(e0 + e2) < 1e-6);
  CHECK(norm(e1 + e3) < 1e-6);
  CHECK(norm(e0) / norm(e1) ==
        doctest::Approx(double(text.width) / text.height).epsilon(1e-6));
}

TEST_CASE("place_text: set pixels stay inside the dilated quad") {
  Font font = Font::load(testutil::dejavu_sans());
  TextMask text = rasterize_text("inside", font, 32);
  auto cand = rect_candidate(16, 16, 175, 105);
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    Homography h = random_homography(rng, cand.region.bbox, 0.15);
    PlacedText placed;
    try {
      placed = place_text(cand, h, text, 224, 160);
    } catch (const PlacementError&) {
      continue;
    }
    // Dilate by scaling the quad 2px outward from its centroid.
    Vec2 c{0, 0};
    for (const Vec2& v : placed.quad.v) c = c + v * 0.25;
    Quad grown = placed.quad;
    for (Vec2& v : grown.v) {
      Vec2 d = v - c;
      double n = norm(d);
      v = v + d * (2.5 / n);
    }
    for (int y = 0; y < placed.mask_height; ++y)
      for (int x = 0; x < placed.mask_width; ++x)
        if (placed.warped_mask[size_t(y) * placed.mask_width + x])
          CHECK(grown.contains({double(x), double(y)}));
    // Area bound: the quad cannot exceed the perturbation-inflated bbox.
    double bbox_area = double(cand.region.bbox.width()) *
                       double(cand.region.bbox.height());
    CHECK(placed.quad.area() <= bbox_area * (1 + 2 * 0.15) * (1 + 2 * 0.15));
  }
}

TEST_CASE("place_text: oversized text is rejected") {
  Font font = Font::load(testutil::dejavu_sans());
  TextMask text = rasterize_text("incomprehensibilities xxxxxxxx", font, 32);
  auto cand = rect_candidate(10, 10, 19, 19);  // 10x10 region
  CHECK_THROWS_AS(
      place_text(cand, Homography::identity(), text, 64, 64),
      PlacementError);
}

TEST_CASE("place_text: quad leaving the image is rejected") {
  Font font = Font::load(testutil::dejavu_sans());
  TextMask text = rasterize_text("wide", font, 32);
  auto cand = rect_candidate(0, 0, 99, 59);
  // Image barely larger than nothing: the quad cannot fit.
  CHECK_THROWS_AS(place_text(cand, Homography::identity(), text, 40, 20),
                  PlacementError);
}
