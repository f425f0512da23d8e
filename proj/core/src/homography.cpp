// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/homography.hpp"

#include <algorithm>
#include <cmath>

#include "textsynth/error.hpp"

namespace textsynth {

Homography Homography::translation(double tx, double ty) {
  Homography h;
  h.m[0][2] = tx;
  h.m[1][2] = ty;
  return h;
}

Vec2 Homography::apply(Vec2 p) const {
  double w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
  if (std::abs(w) < 1e-12)
    throw NumericError("homography maps point to the line at infinity");
  return {(m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w,
          (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w};
}

Homography Homography::normalized() const {
  Homography out = *this;
  double s = m[2][2];
  if (std::abs(s) > 1e-12) {
    for (auto& row : out.m)
      for (double& v : row) v /= s;
  }
  return out;
}

double Homography::det() const {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Homography operator*(const Homography& a, const Homography& b) {
  Homography out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a.m[i][k] * b.m[k][j];
      out.m[i][j] = s;
    }
  return out.normalized();
}

double Quad::area() const {
  double s = 0;
  for (int i = 0; i < 4; ++i) s += cross(v[i], v[(i + 1) % 4]);
  return std::abs(s) / 2.0;
}

namespace {

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
    double o = cross(q - p, r - p);
    return o > 1e-12 ? 1 : (o < -1e-12 ? -1 : 0);
  };
  int o1 = orient(a, b, c), o2 = orient(a, b, d);
  int o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

}  // namespace

bool Quad::is_simple() const {
  // Opposite edges must not cross; adjacent edges share endpoints.
  return !segments_intersect(v[0], v[1], v[2], v[3]) &&
         !segments_intersect(v[1], v[2], v[3], v[0]) && area() > 1e-9;
}

bool Quad::contains(Vec2 p) const {
  bool inside = false;
  for (int i = 0, j = 3; i < 4; j = i++) {
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      double t = (p.y - v[i].y) / (v[j].y - v[i].y);
      if (p.x < v[i].x + t * (v[j].x - v[i].x)) inside = !inside;
    }
  }
  return inside;
}

PixelBox Quad::pixel_bbox() const {
  PixelBox box;
  for (const Vec2& p : v)
    box.expand(int(std::floor(p.x)), int(std::floor(p.y)));
  for (const Vec2& p : v) box.expand(int(std::ceil(p.x)), int(std::ceil(p.y)));
  return box;
}

double quad_iou(const Quad& a, const Quad& b) {
  PixelBox ba = a.pixel_bbox(), bb = b.pixel_bbox();
  PixelBox join;
  join.expand(ba.x0, ba.y0);
  join.expand(ba.x1, ba.y1);
  join.expand(bb.x0, bb.y0);
  join.expand(bb.x1, bb.y1);
  size_t in_a = 0, in_b = 0, in_both = 0;
  for (int y = join.y0; y <= join.y1; ++y) {
    for (int x = join.x0; x <= join.x1; ++x) {
      Vec2 p{x + 0.5, y + 0.5};
      bool ia = a.contains(p), ib = b.contains(p);
      in_a += ia;
      in_b += ib;
      in_both += ia && ib;
    }
  }
  size_t u = in_a + in_b - in_both;
  return u == 0 ? 0.0 : double(in_both) / double(u);
}

namespace {

// Similarity transform taking the centroid to the origin and the mean
// point distance to sqrt(2); standard DLT conditioning.
Homography normalizing_transform(const std::array<Vec2, 4>& pts) {
  Vec2 c{0, 0};
  for (const Vec2& p : pts) c = c + p * 0.25;
  double mean_d = 0;
  for (const Vec2& p : pts) mean_d += norm(p - c) * 0.25;
  double s = mean_d > 1e-12 ? std::sqrt(2.0) / mean_d : 1.0;
  Homography t;
  t.m = {{{s, 0, -s * c.x}, {0, s, -s * c.y}, {0, 0, 1}}};
  return t;
}

void check_not_collinear(const std::array<Vec2, 4>& pts, const char* which) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k) {
        double a = std::abs(cross(pts[j] - pts[i], pts[k] - pts[i]));
        double scale = norm(pts[j] - pts[i]) * norm(pts[k] - pts[i]);
        if (a <= 1e-9 * std::max(1.0, scale))
          throw NumericError(std::string("degenerate correspondences: 3 ") +
                             which + " points are collinear");
      }
}

// Gaussian elimination with partial pivoting; solves in place.
void solve8(double a[8][9]) {
  for (int col = 0; col < 8; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 8; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-12)
      throw NumericError("degenerate correspondences: singular DLT system");
    if (pivot != col)
      for (int c = col; c < 9; ++c) std::swap(a[pivot][c], a[col][c]);
    for (int r = 0; r < 8; ++r) {
      if (r == col) continue;
      double f = a[r][col] / a[col][col];
      for (int c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
    }
  }
  for (int r = 0; r < 8; ++r) a[r][8] /= a[r][r];
}

}  // namespace

Homography homography_from_correspondences(const std::array<Vec2, 4>& src,
                                           const std::array<Vec2, 4>& dst) {
  check_not_collinear(src, "source");
  check_not_collinear(dst, "destination");

  Homography ts = normalizing_transform(src);
  Homography td = normalizing_transform(dst);

  double a[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    Vec2 s = ts.apply(src[i]);
    Vec2 d = td.apply(dst[i]);
    double* r0 = a[2 * i];
    double* r1 = a[2 * i + 1];
    r0[0] = s.x; r0[1] = s.y; r0[2] = 1;
    r0[6] = -s.x * d.x; r0[7] = -s.y * d.x; r0[8] = d.x;
    r1[3] = s.x; r1[4] = s.y; r1[5] = 1;
    r1[6] = -s.x * d.y; r1[7] = -s.y * d.y; r1[8] = d.y;
  }
  solve8(a);

  Homography hn;
  hn.m = {{{a[0][8], a[1][8], a[2][8]},
           {a[3][8], a[4][8], a[5][8]},
           {a[6][8], a[7][8], 1.0}}};
  Homography h = (invert(td) * hn) * ts;
  h = h.normalized();
  if (std::abs(h.det()) <= 1e-9)
    throw NumericError("degenerate correspondences: singular homography");
  return h;
}

Homography invert(const Homography& h) {
  double d = h.det();
  if (std::abs(d) < 1e-12)
    throw NumericError("cannot invert a singular homography");
  const auto& m = h.m;
  Homography out;
  out.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
  out.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
  out.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
  out.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
  out.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
  out.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
  out.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
  out.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
  out.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
  return out.normalized();
}

double condition_estimate(const Homography& h) {
  auto norm_inf = [](const Homography& x) {
    double best = 0;
    for (const auto& row : x.m) {
      double s = 0;
      for (double v : row) s += std::abs(v);
      best = std::max(best, s);
    }
    return best;
  };
  return norm_inf(h) * norm_inf(invert(h));
}

Homography random_homography(Rng& rng, const PixelBox& bbox,
                             double max_perturb) {
  if (max_perturb < 0 || max_perturb > 0.3)
    throw InvalidArgument("random_homography: max_perturb must be in [0,0.3]");
  if (!bbox.valid() || bbox.width() < 2 || bbox.height() < 2)
    throw InvalidArgument("random_homography: degenerate bbox");
  if (max_perturb == 0) return Homography::identity();

  const std::array<Vec2, 4> src = {
      Vec2{double(bbox.x0), double(bbox.y0)},
      Vec2{double(bbox.x1), double(bbox.y0)},
      Vec2{double(bbox.x1), double(bbox.y1)},
      Vec2{double(bbox.x0), double(bbox.y1)},
  };
  const double diag = std::hypot(double(bbox.x1 - bbox.x0),
                                 double(bbox.y1 - bbox.y0));
  const double radius = max_perturb * diag;

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::array<Vec2, 4> dst;
    for (int i = 0; i < 4; ++i) {
      double u, v;
      do {
        u = rng.uniform(-1.0, 1.0);
        v = rng.uniform(-1.0, 1.0);
      } while (u * u + v * v > 1.0);
      dst[i] = src[i] + Vec2{u, v} * radius;
    }
    Quad q{dst};
    if (!q.is_simple()) continue;
    try {
      Homography h = homography_from_correspondences(src, dst);
      if (condition_estimate(h) < 1e6) return h;
    } catch (const NumericError&) {
      continue;
    }
  }
  throw NumericError(
      "random_homography: no well-conditioned sample after 100 tries");
}

RasterImage warp_raster(const RasterImage& input, const Homography& h,
                        int out_width, int out_height, Interp interp) {
  if (out_width < 1 || out_height < 1)
    throw InvalidArgument("warp_raster: output size must be >= 1x1");
  const Homography inv = invert(h);
  RasterImage out(out_width, out_height, input.channels, 0.f);
  std::vector<float> sample(input.channels);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      Vec2 p;
      double wph = inv.m[2][0] * x + inv.m[2][1] * y + inv.m[2][2];
      if (std::abs(wph) < 1e-12) continue;
      p.x = (inv.m[0][0] * x + inv.m[0][1] * y + inv.m[0][2]) / wph;
      p.y = (inv.m[1][0] * x + inv.m[1][1] * y + inv.m[1][2]) / wph;
      if (interp == Interp::kNearest) {
        int sx = int(std::lround(p.x)), sy = int(std::lround(p.y));
        if (sx < 0 || sy < 0 || sx >= input.width || sy >= input.height)
          continue;
        for (int c = 0; c < input.channels; ++c)
          out.at(x, y, c) = input.at(sx, sy, c);
      } else {
        if (p.x < 0 || p.y < 0 || p.x > input.width - 1 ||
            p.y > input.height - 1)
          continue;
        bilinear_sample(input, p.x, p.y, sample);
        for (int c = 0; c < input.channels; ++c) out.at(x, y, c) = sample[c];
      }
    }
  }
  return out;
}

std::vector<uint8_t> warp_binary_mask(const std::vector<uint8_t>& mask,
                                      int width, int height,
                                      const Homography& h, int out_width,
                                      int out_height) {
  RasterImage tmp(width, height, 1);
  for (size_t i = 0; i < mask.size(); ++i) tmp.data[i] = float(mask[i]);
  RasterImage warped = warp_raster(tmp, h, out_width, out_height,
                                   Interp::kBilinear);
  std::vector<uint8_t> out(warped.data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = warped.data[i] >= 0.5f;
  return out;
}

}  // namespace textsynth
