// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "textsynth/image.hpp"
#include "textsynth/pixel.hpp"
#include "textsynth/rng.hpp"

namespace textsynth {

struct Vec2 {
  double x = 0;
  double y = 0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

// 3x3 projective map, stored row-major and kept normalized so the
// bottom-right entry is 1 whenever it is nonzero.
struct Homography {
  std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  static Homography identity() { return {}; }
  static Homography translation(double tx, double ty);

  Vec2 apply(Vec2 p) const;
  Homography normalized() const;
  double det() const;
};

// Matrix product: (a * b).apply(p) == a.apply(b.apply(p)).
Homography operator*(const Homography& a, const Homography& b);

// 4 ordered vertices, clockwise starting at the top-left of the source
// rectangle they were mapped from (image coordinates, y down).
struct Quad {
  std::array<Vec2, 4> v;

  double area() const;          // absolute area
  bool is_simple() const;       // no two non-adjacent edges intersect
  bool contains(Vec2 p) const;  // even-odd test
  PixelBox pixel_bbox() const;
};

// Fraction of intersection over union, evaluated on pixel centers of the
// joint bounding box. Deterministic, adequate for overlap rejection.
double quad_iou(const Quad& a, const Quad& b);

// Direct linear transform from 4 point correspondences (Hartley
// normalization, 8x8 elimination). No 3 points of either quad may be
// collinear. The result maps src[i] to dst[i] to ~1e-9.
Homography homography_from_correspondences(const std::array<Vec2, 4>& src,
                                           const std::array<Vec2, 4>& dst);

// Random perspective for a region: dst corners are the bbox corners plus
// uniform-in-disk offsets of radius max_perturb * bbox diagonal, resampled
// (up to 100 times) until the dst quad is simple and the map is well
// conditioned (kappa_inf < 1e6). max_perturb must be in [0, 0.3]; 0 gives
// the exact identity.
Homography random_homography(Rng& rng, const PixelBox& bbox,
                             double max_perturb);

// Inverse map; h * invert(h) is the identity to ~1e-9 per entry.
Homography invert(const Homography& h);

// Infinity-norm condition estimate ||H|| * ||H^-1||.
double condition_estimate(const Homography& h);

enum class Interp { kBilinear, kNearest };

// Inverse-mapping warp: each output pixel samples the input at
// h^-1(output coord); samples falling outside the source are 0.
RasterImage warp_raster(const RasterImage& input, const Homography& h,
                        int out_width, int out_height,
                        Interp interp = Interp::kBilinear);

// Binary masks warp through bilinear coverage thresholded at 0.5.
std::vector<uint8_t> warp_binary_mask(const std::vector<uint8_t>& mask,
                                      int width, int height,
                                      const Homography& h, int out_width,
                                      int out_height);

}  // namespace textsynth
