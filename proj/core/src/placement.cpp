// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace textsynth {

namespace {

double point_line_distance(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 d = b - a;
  double len = norm(d);
  if (len < 1e-12) return norm(p - a);
  return std::abs(cross(d, p - a)) / len;
}

void douglas_peucker(std::span<const Vec2> pts, size_t lo, size_t hi,
                     double eps, std::vector<size_t>* keep) {
  if (hi <= lo + 1) return;
  double worst = -1;
  size_t split = lo;
  for (size_t i = lo + 1; i < hi; ++i) {
    double d = point_line_distance(pts[i], pts[lo], pts[hi]);
    if (d > worst) {
      worst = d;
      split = i;
    }
  }
  if (worst > eps) {
    douglas_peucker(pts, lo, split, eps, keep);
    keep->push_back(split);
    douglas_peucker(pts, split, hi, eps, keep);
  }
}

// Even-odd point-in-polygon on the full (unsimplified) boundary.
bool in_polygon(std::span<const Vec2> poly, Vec2 p) {
  bool inside = false;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    if ((poly[i].y > p.y) != (poly[j].y > p.y)) {
      double t = (p.y - poly[i].y) / (poly[j].y - poly[i].y);
      if (p.x < poly[i].x + t * (poly[j].x - poly[i].x)) inside = !inside;
    }
  }
  return inside;
}

Vec2 polygon_centroid(std::span<const Vec2> poly) {
  Vec2 c{0, 0};
  for (const Vec2& p : poly) c = c + p;
  return c * (1.0 / double(poly.size()));
}

// Interior normal of segment a->b: probes both sides near the midpoint,
// falls back to the centroid side for thin shapes.
Vec2 interior_normal(std::span<const Vec2> poly, Vec2 a, Vec2 b) {
  Vec2 d = b - a;
  double len = norm(d);
  Vec2 n{-d.y / len, d.x / len};
  Vec2 mid = (a + b) * 0.5;
  for (double probe : {1.5, 3.0, 0.75}) {
    bool pos = in_polygon(poly, mid + n * probe);
    bool neg = in_polygon(poly, mid - n * probe);
    if (pos != neg) return pos ? n : Vec2{-n.x, -n.y};
  }
  Vec2 c = polygon_centroid(poly);
  return dot(c - mid, n) >= 0 ? n : Vec2{-n.x, -n.y};
}

OrientedSegment principal_axis_segment(std::span<const Vec2> poly) {
  Vec2 c = polygon_centroid(poly);
  double sxx = 0, sxy = 0, syy = 0;
  for (const Vec2& p : poly) {
    Vec2 q = p - c;
    sxx += q.x * q.x;
    sxy += q.x * q.y;
    syy += q.y * q.y;
  }
  // Largest eigenvector of the 2x2 covariance.
  double tr = sxx + syy;
  double det = sxx * syy - sxy * sxy;
  double lam = tr / 2 + std::sqrt(std::max(0.0, tr * tr / 4 - det));
  Vec2 dir;
  if (std::abs(sxy) > 1e-12)
    dir = {lam - syy, sxy};
  else
    dir = sxx >= syy ? Vec2{1, 0} : Vec2{0, 1};
  double dn = norm(dir);
  dir = {dir.x / dn, dir.y / dn};

  double tmin = std::numeric_limits<double>::max(), tmax = -tmin;
  for (const Vec2& p : poly) {
    double t = dot(p - c, dir);
    tmin = std::min(tmin, t);
    tmax = std::max(tmax, t);
  }
  OrientedSegment seg;
  seg.a = c + dir * tmin;
  seg.b = c + dir * tmax;
  seg.up = interior_normal(poly, seg.a, seg.b);
  // The axis passes through the interior; prefer screen-up text when the
  // probe is ambiguous either way.
  if (seg.up.y > 0) {
    std::swap(seg.a, seg.b);
    seg.up = {-seg.up.x, -seg.up.y};
  }
  if (cross(seg.up, seg.direction()) < 0) std::swap(seg.a, seg.b);
  return seg;
}

}  // namespace

OrientedSegment fit_placement_edge(std::span<const Vec2> boundary) {
  if (boundary.size() < 3)
    throw InvalidArgument("fit_placement_edge: boundary needs >= 3 vertices");

  // Close the ring by anchoring at boundary[0] and its farthest point.
  size_t far = 0;
  double best = -1;
  for (size_t i = 1; i < boundary.size(); ++i) {
    double d = norm(boundary[i] - boundary[0]);
    if (d > best) {
      best = d;
      far = i;
    }
  }
  std::vector<Vec2> ring(boundary.begin(), boundary.end());
  ring.push_back(boundary[0]);  // wrap for the second half

  std::vector<size_t> keep;
  keep.push_back(0);
  douglas_peucker(ring, 0, far, 2.0, &keep);
  keep.push_back(far);
  douglas_peucker(ring, far, ring.size() - 1, 2.0, &keep);
  keep.push_back(ring.size() - 1);

  double best_len = -1;
  Vec2 a, b;
  for (size_t i = 0; i + 1 < keep.size(); ++i) {
    double len = norm(ring[keep[i + 1]] - ring[keep[i]]);
    if (len > best_len) {
      best_len = len;
      a = ring[keep[i]];
      b = ring[keep[i + 1]];
    }
  }
  if (best_len < 10.0) return principal_axis_segment(boundary);

  OrientedSegment seg;
  seg.a = a;
  seg.b = b;
  seg.up = interior_normal(boundary, a, b);
  // Keep reading direction left-to-right in the text frame.
  Vec2 d = seg.direction();
  if (cross(seg.up, d) < 0) {
    std::swap(seg.a, seg.b);
  }
  return seg;
}

OrientedSegment fit_placement_edge(const std::vector<PixelPos>& boundary) {
  std::vector<Vec2> pts;
  pts.reserve(boundary.size());
  for (const PixelPos& p : boundary) pts.push_back({double(p.x), double(p.y)});
  return fit_placement_edge(pts);
}

namespace {

// Distance from `origin` along `dir` to the first boundary crossing.
double ray_exit_distance(std::span<const Vec2> poly, Vec2 origin, Vec2 dir) {
  double best = std::numeric_limits<double>::max();
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    Vec2 e = poly[i] - poly[j];
    double denom = cross(dir, e);
    if (std::abs(denom) < 1e-12) continue;
    Vec2 w = poly[j] - origin;
    double t = cross(w, e) / denom;        // along the ray
    double u = cross(w, dir) / denom;      // along the edge
    if (t > 1e-9 && u >= 0 && u <= 1) best = std::min(best, t);
  }
  return best;
}

}  // namespace

PlacedText place_text(const CandidateRegion& region, const Homography& h,
                      const TextMask& text, int image_width, int image_height,
                      const PlaceOptions& opts) {
  if (text.set_pixel_count() == 0)
    throw InvalidArgument("place_text: empty text mask");
  if (region.region.boundary.size() < 3)
    throw PlacementError("place_text: region boundary is degenerate");

  // Region boundary in the warped frame.
  std::vector<Vec2> warped;
  warped.reserve(region.region.boundary.size());
  for (const PixelPos& p : region.region.boundary)
    warped.push_back(h.apply({double(p.x), double(p.y)}));

  OrientedSegment edge = fit_placement_edge(warped);
  const double edge_len = edge.length();
  if (edge_len < 4)
    throw PlacementError("place_text: placement edge too short");

  // Inscribed height above the edge: the shortest interior chord along
  // the up direction, probed at several points of the edge. Bounded by
  // the warped bbox diagonal in case a probe slips through a vertex.
  PixelBox wb;
  for (const Vec2& p : warped) {
    wb.expand(int(std::floor(p.x)), int(std::floor(p.y)));
    wb.expand(int(std::ceil(p.x)), int(std::ceil(p.y)));
  }
  Vec2 d = edge.direction();
  double inscribed = std::hypot(double(wb.width()), double(wb.height()));
  for (double f : {0.2, 0.35, 0.5, 0.65, 0.8}) {
    Vec2 p = edge.a + d * (edge_len * f);
    // Nudge inside so the probe does not start exactly on the contour.
    inscribed = std::min(
        inscribed, ray_exit_distance(warped, p + edge.up * 0.5, edge.up) + 0.5);
  }
  if (inscribed < 4)
    throw PlacementError("place_text: region too shallow above the edge");

  const double usable_w = edge_len * (1.0 - 2.0 * opts.margins);
  const double scale = std::min(opts.max_height_frac * inscribed / text.height,
                                usable_w / text.width);
  if (scale * text.px_height < opts.min_px_height)
    throw PlacementError("place_text: text does not fit (would drop below " +
                         std::to_string(opts.min_px_height) + " px)");

  // Similarity: mask pixel coords -> warped frame. Mask x runs along the
  // edge, mask y (down) runs against the interior normal, the baseline
  // sits baseline_offset * inscribed above the edge.
  Vec2 origin = (edge.a + edge.b) * 0.5 + edge.up * (opts.baseline_offset * inscribed);
  const double cx = text.width / 2.0;
  const double cy = double(text.baseline_y);
  Homography sim;
  sim.m = {{{d.x * scale, -edge.up.x * scale,
             origin.x - d.x * scale * cx + edge.up.x * scale * cy},
            {d.y * scale, -edge.up.y * scale,
             origin.y - d.y * scale * cx + edge.up.y * scale * cy},
            {0, 0, 1}}};

  const Homography inv_h = invert(h);
  const Homography mask_to_image = inv_h * sim;

  PlacedText placed;
  placed.transcript = text.transcript;
  placed.source = text;

  // Word quad: canvas corners through the full transform, top-left first.
  const std::array<Vec2, 4> canvas = {
      Vec2{0, 0}, Vec2{double(text.width), 0},
      Vec2{double(text.width), double(text.height)},
      Vec2{0, double(text.height)}};
  for (int i = 0; i < 4; ++i) placed.quad.v[i] = mask_to_image.apply(canvas[i]);

  for (const Vec2& v : placed.quad.v) {
    if (v.x < 0 || v.y < 0 || v.x > image_width - 1 || v.y > image_height - 1)
      throw PlacementError("place_text: quad exits the image");
  }
  if (!placed.quad.is_simple())
    throw PlacementError("place_text: warped quad is not simple");

  for (const PixelBox& cb : text.char_boxes) {
    Quad q;
    q.v[0] = mask_to_image.apply({double(cb.x0), double(cb.y0)});
    q.v[1] = mask_to_image.apply({double(cb.x1 + 1), double(cb.y0)});
    q.v[2] = mask_to_image.apply({double(cb.x1 + 1), double(cb.y1 + 1)});
    q.v[3] = mask_to_image.apply({double(cb.x0), double(cb.y1 + 1)});
    placed.char_quads.push_back(q);
  }

  // Rasterize the warped mask in image coordinates (inverse mapping,
  // bilinear coverage, 0.5 threshold), confined to the quad's bbox.
  placed.mask_width = image_width;
  placed.mask_height = image_height;
  placed.warped_mask.assign(size_t(image_width) * image_height, 0);
  const Homography image_to_mask = invert(mask_to_image);
  PixelBox bbox = placed.quad.pixel_bbox();
  bbox.x0 = std::max(0, bbox.x0 - 1);
  bbox.y0 = std::max(0, bbox.y0 - 1);
  bbox.x1 = std::min(image_width - 1, bbox.x1 + 1);
  bbox.y1 = std::min(image_height - 1, bbox.y1 + 1);
  for (int y = bbox.y0; y <= bbox.y1; ++y) {
    for (int x = bbox.x0; x <= bbox.x1; ++x) {
      Vec2 p = image_to_mask.apply({double(x), double(y)});
      if (p.x < 0 || p.y < 0 || p.x > text.width - 1 || p.y > text.height - 1)
        continue;
      int x0 = int(p.x), y0 = int(p.y);
      int x1 = std::min(x0 + 1, text.width - 1);
      int y1 = std::min(y0 + 1, text.height - 1);
      double fx = p.x - x0, fy = p.y - y0;
      double v = (text.at(x0, y0) * (1 - fx) + text.at(x1, y0) * fx) * (1 - fy) +
                 (text.at(x0, y1) * (1 - fx) + text.at(x1, y1) * fx) * fy;
      if (v >= 0.5)
        placed.warped_mask[size_t(y) * image_width + x] = 1;
    }
  }
  if (std::count(placed.warped_mask.begin(), placed.warped_mask.end(), 1) == 0)
    throw PlacementError("place_text: warped mask is empty");
  return placed;
}

}  // namespace textsynth
