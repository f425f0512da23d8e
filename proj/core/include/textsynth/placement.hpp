// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <span>

#include "textsynth/font.hpp"
#include "textsynth/homography.hpp"
#include "textsynth/semantic.hpp"

namespace textsynth {

// Raised when a text cannot be placed in a region (does not fit, region
// degenerate after warping, quad exits the image). Callers retry with a
// different region or text.
class PlacementError : public Error {
public:
  explicit PlacementError(const std::string& what) : Error(what) {}
};

// Baseline segment for text placement: runs a -> b, with the region
// interior on the side of `up` (the glyph up direction).
struct OrientedSegment {
  Vec2 a, b;
  Vec2 up;  // unit normal pointing into the region
  double length() const { return norm(b - a); }
  Vec2 direction() const {
    Vec2 d = b - a;
    double n = norm(d);
    return {d.x / n, d.y / n};
  }
};

// Fits the text baseline on a region boundary: Douglas-Peucker
// simplification (epsilon 2 px), then the longest segment, oriented so
// the region interior lies above the baseline. Falls back to the
// principal axis of the boundary points if the longest segment is
// shorter than 10 px. The boundary must have at least 3 vertices.
OrientedSegment fit_placement_edge(std::span<const Vec2> boundary);
OrientedSegment fit_placement_edge(const std::vector<PixelPos>& boundary);

// A text mask embedded into background coordinates.
struct PlacedText {
  std::vector<uint8_t> warped_mask;  // image-sized binary raster
  int mask_width = 0;
  int mask_height = 0;
  Quad quad;
  std::string transcript;
  TextMask source;
  // Per-character quads in background coordinates (char boxes mapped
  // through the same transform as the word quad).
  std::vector<Quad> char_quads;
};

struct PlaceOptions {
  double margins = 0.05;          // side margin fraction of the edge length
  double max_height_frac = 0.6;   // text height cap vs inscribed height
  double baseline_offset = 0.10;  // baseline lift above the edge
  int min_px_height = 8;          // reject if effective glyph size drops below
};

// Places fronto-parallel text into a region under homography h:
// warps the region boundary by h, fits the placement edge in the warped
// frame, scales the text to fit (height cap + margins), sets the baseline
// parallel to the edge, then maps the mask and its bounding-box corners
// back through invert(h) into image coordinates (image_width x image_height).
PlacedText place_text(const CandidateRegion& region, const Homography& h,
                      const TextMask& text, int image_width, int image_height,
                      const PlaceOptions& opts = {});

}  // namespace textsynth
