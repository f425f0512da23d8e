// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <vector>

#include "textsynth/image.hpp"
#include "textsynth/pixel.hpp"

namespace textsynth {

// Label image: one region id per pixel, ids compact in [0, region_count).
struct RegionMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  int region_count = 0;

  int label_at(int x, int y) const { return labels[size_t(y) * width + x]; }
};

// A single segmented region with its traced outer contour.
struct Region {
  int id = 0;
  size_t area = 0;
  PixelBox bbox;
  LabColor mean_lab;
  std::vector<PixelPos> boundary;  // closed clockwise pixel contour
  std::vector<PixelPos> pixels;    // raster-scan order
};

// SLIC-style superpixel clustering: seeds on a regular grid, assignment by
// 5-D distance (Lab + compactness-weighted xy, search window 2Sx2S with
// S = sqrt(pixels/k)), Lloyd updates. If `iteration_costs` is given it
// receives the total squared 5-D assignment cost after each iteration;
// the sequence is non-increasing.
RegionMap slic_superpixels(const RasterImage& image, int k,
                           double compactness, int iterations,
                           std::vector<double>* iteration_costs = nullptr);

// Splits labels into 4-connected components, absorbs fragments smaller
// than (pixels/region_count)/4 into their largest adjacent region, and
// re-compacts label ids.
RegionMap enforce_connectivity(const RegionMap& map);

// Agglomerative merging on the region adjacency graph: repeatedly merges
// the adjacent pair with the globally smallest mean-Lab distance while
// that distance is below `delta_e_threshold`.
RegionMap merge_similar(const RegionMap& map, const RasterImage& image,
                        double delta_e_threshold);

// One Region per label with Moore-neighbor traced clockwise boundary.
std::vector<Region> extract_regions(const RegionMap& map,
                                    const RasterImage& image);

// Throws unless every pixel carries a label in [0, region_count) and every
// label is used at least once.
void validate_region_map(const RegionMap& map);

// Scales the default superpixel count to an image's pixel count
// (k for 512x512, proportional elsewhere, at least 1).
int scaled_superpixel_count(int k_at_512, size_t pixel_count);

// Debug dump of a label map as an indexed PNG (label = palette index).
// Maps with more than 256 labels are written modulo 256.
void dump_region_map_png(const RegionMap& map, const std::string& path);

}  // namespace textsynth
