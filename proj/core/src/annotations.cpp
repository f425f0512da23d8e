// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include <array>
#include <cmath>
#include <fstream>

#include "textsynth/pipeline.hpp"

namespace textsynth {

namespace {

int round_half_up(double v) { return int(std::floor(v + 0.5)); }

// Clockwise (screen sense, y down) starting at the visually top-left
// vertex: smallest x+y, ties to the smaller y.
Quad normalize_quad(const Quad& quad) {
  Quad q = quad;
  double sum = 0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& a = q.v[i];
    const Vec2& b = q.v[(i + 1) % 4];
    sum += a.x * b.y - b.x * a.y;
  }
  if (sum < 0) std::swap(q.v[1], q.v[3]);
  int start = 0;
  for (int i = 1; i < 4; ++i) {
    double si = q.v[i].x + q.v[i].y;
    double s0 = q.v[start].x + q.v[start].y;
    if (si < s0 - 1e-9 ||
        (std::abs(si - s0) <= 1e-9 && q.v[i].y < q.v[start].y))
      start = i;
  }
  Quad out;
  for (int i = 0; i < 4; ++i) out.v[i] = q.v[(start + i) % 4];
  return out;
}

}  // namespace

void write_annotations(const SynthesisRecord& record,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write annotations: " + path);
  for (const InstanceRecord& inst : record.instances) {
    Quad q = normalize_quad(inst.quad);
    for (const Vec2& v : q.v)
      out << round_half_up(v.x) << ',' << round_half_up(v.y) << ',';
    out << inst.transcript << '\n';
  }
  if (!out) throw IoError("annotation write failed: " + path);
}

std::vector<std::pair<std::array<std::array<int, 2>, 4>, std::string>>
parse_annotations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open annotations: " + path);
  std::vector<std::pair<std::array<std::array<int, 2>, 4>, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<std::array<int, 2>, 4> quad;
    size_t pos = 0;
    for (int i = 0; i < 8; ++i) {
      size_t comma = line.find(',', pos);
      if (comma == std::string::npos)
        throw IoError("malformed annotation line in " + path + ": " + line);
      quad[size_t(i / 2)][size_t(i % 2)] = std::stoi(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    // The transcript is everything after the 8th comma, verbatim.
    out.push_back({quad, line.substr(pos)});
  }
  return out;
}

}  // namespace textsynth
