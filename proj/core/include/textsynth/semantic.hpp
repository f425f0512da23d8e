// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "textsynth/segmentation.hpp"

namespace textsynth {

// Per-pixel semantic class ids with the id -> name palette. Produced by an
// external segmentation tool; this module only ingests the files.
struct SemanticMap {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> class_ids;
  std::map<int, std::string> palette;

  int class_at(int x, int y) const { return class_ids[size_t(y) * width + x]; }
};

// A contour region paired with its semantic score: the score is the top
// fraction of the region's pixels covered by one semantic class.
struct CandidateRegion {
  Region region;
  double score = 0;
  std::string dominant_class;
  std::map<std::string, double> class_fractions;
};

// Palette file: UTF-8 text, one `index<TAB>class_name` per line.
std::map<int, std::string> load_palette(const std::string& path);

// Indexed (or grayscale) PNG whose sample values are class indices; every
// index present must appear in the palette.
SemanticMap load_semantic_map(const std::string& image_path,
                              const std::string& palette_path);

// fraction(c) = |region pixels of class c| / region.area. Exact pixel
// tallies divided once, so fractions sum to 1.
std::map<int, double> overlap_fractions(const Region& region,
                                        const SemanticMap& map);

// Top class fraction and its class. Ties: larger absolute pixel overlap,
// then smaller class id.
std::pair<double, std::string> semantic_score(const Region& region,
                                              const SemanticMap& map);

// Keeps regions whose dominant class is whitelisted, score >= min_score and
// area >= min_area_frac * image pixels; sorted by score desc, area desc.
std::vector<CandidateRegion> select_candidates(
    const std::vector<Region>& regions, const SemanticMap& map,
    const std::set<std::string>& whitelist, double min_score,
    double min_area_frac);

}  // namespace textsynth
