// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/semantic.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace textsynth {

std::map<int, std::string> load_palette(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open palette file: " + path);
  std::map<int, std::string> palette;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw IoError("malformed palette line " + std::to_string(lineno) +
                    " in " + path + ": expected index<TAB>class_name");
    int index = 0;
    try {
      size_t pos = 0;
      index = std::stoi(line.substr(0, tab), &pos);
      if (pos != tab) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw IoError("malformed palette index on line " +
                    std::to_string(lineno) + " in " + path);
    }
    std::string name = line.substr(tab + 1);
    if (name.empty())
      throw IoError("empty class name on line " + std::to_string(lineno) +
                    " in " + path);
    if (index < 0 || index > 255)
      throw IoError("palette index out of range on line " +
                    std::to_string(lineno) + " in " + path);
    palette[index] = name;
  }
  if (palette.empty()) throw IoError("empty palette file: " + path);
  return palette;
}

SemanticMap load_semantic_map(const std::string& image_path,
                              const std::string& palette_path) {
  IndexedImage idx = load_indexed_png(image_path);
  SemanticMap map;
  map.width = idx.width;
  map.height = idx.height;
  map.class_ids = std::move(idx.indices);
  map.palette = load_palette(palette_path);
  for (uint8_t id : map.class_ids) {
    if (!map.palette.count(id))
      throw IoError("semantic map " + image_path + " uses index " +
                    std::to_string(int(id)) + " missing from palette " +
                    palette_path);
  }
  return map;
}

namespace {

// Exact per-class pixel tallies for a region.
std::map<int, size_t> overlap_counts(const Region& region,
                                     const SemanticMap& map) {
  if (region.pixels.empty())
    throw InvalidArgument("overlap_fractions: empty region");
  std::map<int, size_t> counts;
  for (const PixelPos& p : region.pixels) {
    if (p.x < 0 || p.y < 0 || p.x >= map.width || p.y >= map.height)
      throw InvalidArgument("overlap_fractions: region pixel outside map");
    counts[map.class_at(p.x, p.y)] += 1;
  }
  return counts;
}

}  // namespace

std::map<int, double> overlap_fractions(const Region& region,
                                        const SemanticMap& map) {
  std::map<int, double> fractions;
  for (const auto& [cls, count] : overlap_counts(region, map))
    fractions[cls] = double(count) / double(region.area);
  return fractions;
}

std::pair<double, std::string> semantic_score(const Region& region,
                                              const SemanticMap& map) {
  const auto counts = overlap_counts(region, map);
  // Max count = max fraction (same denominator); ties fall to the
  // smaller class id because the map iterates in id order.
  int best_cls = -1;
  size_t best_count = 0;
  for (const auto& [cls, count] : counts) {
    if (count > best_count) {
      best_count = count;
      best_cls = cls;
    }
  }
  double score = double(best_count) / double(region.area);
  return {score, map.palette.at(best_cls)};
}

std::vector<CandidateRegion> select_candidates(
    const std::vector<Region>& regions, const SemanticMap& map,
    const std::set<std::string>& whitelist, double min_score,
    double min_area_frac) {
  if (whitelist.empty())
    throw InvalidArgument("select_candidates: empty class whitelist");
  if (min_score < 0 || min_score > 1 || min_area_frac < 0 || min_area_frac > 1)
    throw InvalidArgument("select_candidates: thresholds must be in [0,1]");

  const double min_area = min_area_frac * double(map.width) * map.height;
  std::vector<CandidateRegion> out;
  for (const Region& region : regions) {
    if (double(region.area) < min_area) continue;
    auto [score, cls] = semantic_score(region, map);
    if (score < min_score || !whitelist.count(cls)) continue;
    CandidateRegion cand;
    cand.region = region;
    cand.score = score;
    cand.dominant_class = cls;
    for (const auto& [id, frac] : overlap_fractions(region, map))
      cand.class_fractions[map.palette.at(id)] += frac;
    out.push_back(std::move(cand));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const CandidateRegion& a, const CandidateRegion& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.region.area > b.region.area;
                   });
  return out;
}

}  // namespace textsynth
