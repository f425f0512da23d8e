// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>
#include <unordered_set>

namespace textsynth {

namespace {

struct Cluster {
  double L = 0, a = 0, b = 0;
  double x = 0, y = 0;
};

double dist2(const Cluster& c, double L, double a, double b, double x,
             double y, double spatial_weight2) {
  double dl = c.L - L, da = c.a - a, db = c.b - b;
  double dx = c.x - x, dy = c.y - y;
  return dl * dl + da * da + db * db + spatial_weight2 * (dx * dx + dy * dy);
}

}  // namespace

RegionMap slic_superpixels(const RasterImage& image, int k, double compactness,
                           int iterations,
                           std::vector<double>* iteration_costs) {
  const size_t n = image.pixel_count();
  if (k < 1) throw InvalidArgument("slic_superpixels: k must be >= 1");
  if (size_t(k) > n)
    throw InvalidArgument("slic_superpixels: k exceeds pixel count");
  if (iterations < 1)
    throw InvalidArgument("slic_superpixels: iterations must be >= 1");

  const int w = image.width, h = image.height;
  const LabImage lab = rgb_to_lab(to_rgb(image));

  // Seed grid: ny rows matching the image aspect, first k cells seeded
  // row-major at cell centers.
  int ny = std::max(1, int(std::lround(std::sqrt(double(k) * h / w))));
  ny = std::min(ny, k);
  int nx = (k + ny - 1) / ny;
  const double cell_w = double(w) / nx;
  const double cell_h = double(h) / ny;

  std::vector<Cluster> centers;
  centers.reserve(k);
  for (int gy = 0; gy < ny && int(centers.size()) < k; ++gy) {
    for (int gx = 0; gx < nx && int(centers.size()) < k; ++gx) {
      double cx = (gx + 0.5) * cell_w;
      double cy = (gy + 0.5) * cell_h;
      int px = std::min(w - 1, int(cx));
      int py = std::min(h - 1, int(cy));
      size_t i = size_t(py) * w + px;
      centers.push_back({lab.L[i], lab.a[i], lab.b[i], cx, cy});
    }
  }
  const int kc = int(centers.size());

  const double step = std::sqrt(double(n) / k);  // S
  const double window = 2.0 * step;              // candidates within 2S x 2S
  const double sw2 =
      (compactness / step) * (compactness / step);  // (m/S)^2 weight

  std::vector<int> labels(n, -1);
  std::vector<double> best(n, std::numeric_limits<double>::max());

  for (int iter = 0; iter < iterations; ++iter) {
    // Assignment. Candidates for a pixel: every center within the window,
    // plus its current center, scanned in ascending center id.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        size_t i = size_t(y) * w + x;
        double bd = std::numeric_limits<double>::max();
        int bl = labels[i];
        if (bl >= 0)
          bd = dist2(centers[bl], lab.L[i], lab.a[i], lab.b[i], x, y, sw2);
        // Grid cells within +-2 cover all centers at window distance.
        int gx0 = std::max(0, int(x / cell_w) - 2);
        int gx1 = std::min(nx - 1, int(x / cell_w) + 2);
        int gy0 = std::max(0, int(y / cell_h) - 2);
        int gy1 = std::min(ny - 1, int(y / cell_h) + 2);
        for (int gy = gy0; gy <= gy1; ++gy) {
          for (int gx = gx0; gx <= gx1; ++gx) {
            int c = gy * nx + gx;
            if (c >= kc || c == bl) continue;
            if (std::abs(centers[c].x - x) > window ||
                std::abs(centers[c].y - y) > window)
              continue;
            double d =
                dist2(centers[c], lab.L[i], lab.a[i], lab.b[i], x, y, sw2);
            if (d < bd) {
              bd = d;
              bl = c;
            }
          }
        }
        if (bl < 0) {
          // Outside every window (can only happen on the first pass with
          // degenerate grids): take the spatially nearest center.
          double sd = std::numeric_limits<double>::max();
          for (int c = 0; c < kc; ++c) {
            double dx = centers[c].x - x, dy = centers[c].y - y;
            double d = dx * dx + dy * dy;
            if (d < sd) {
              sd = d;
              bl = c;
            }
          }
          bd = dist2(centers[bl], lab.L[i], lab.a[i], lab.b[i], x, y, sw2);
        }
        labels[i] = bl;
        best[i] = bd;
      }
    }

    // Lloyd update: each center moves to the 5-D mean of its pixels.
    std::vector<Cluster> sums(kc);
    std::vector<size_t> counts(kc, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        size_t i = size_t(y) * w + x;
        Cluster& s = sums[labels[i]];
        s.L += lab.L[i];
        s.a += lab.a[i];
        s.b += lab.b[i];
        s.x += x;
        s.y += y;
        ++counts[labels[i]];
      }
    }
    for (int c = 0; c < kc; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its position
      double inv = 1.0 / double(counts[c]);
      centers[c] = {sums[c].L * inv, sums[c].a * inv, sums[c].b * inv,
                    sums[c].x * inv, sums[c].y * inv};
    }

    if (iteration_costs) {
      double cost = 0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          size_t i = size_t(y) * w + x;
          cost += dist2(centers[labels[i]], lab.L[i], lab.a[i], lab.b[i], x, y,
                        sw2);
        }
      iteration_costs->push_back(cost);
    }
  }

  // Compact ids: non-empty clusters only, in order of first appearance.
  std::vector<int> remap(kc, -1);
  int next = 0;
  RegionMap map;
  map.width = w;
  map.height = h;
  map.labels.resize(n);
  for (size_t i = 0; i < n; ++i) {
    int& r = remap[labels[i]];
    if (r < 0) r = next++;
    map.labels[i] = r;
  }
  map.region_count = next;
  return map;
}

RegionMap enforce_connectivity(const RegionMap& map) {
  validate_region_map(map);
  const int w = map.width, h = map.height;
  const size_t n = size_t(w) * h;

  // Connected components of each label, 4-connectivity, ids in scan order.
  std::vector<int> cc(n, -1);
  std::vector<size_t> cc_size;
  std::vector<int> stack;
  for (size_t start = 0; start < n; ++start) {
    if (cc[start] >= 0) continue;
    int id = int(cc_size.size());
    int lab = map.labels[start];
    size_t count = 0;
    stack.push_back(int(start));
    cc[start] = id;
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      ++count;
      int x = i % w, y = i / w;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (auto& [px, py] : nb) {
        if (px < 0 || py < 0 || px >= w || py >= h) continue;
        size_t j = size_t(py) * w + px;
        if (cc[j] < 0 && map.labels[j] == lab) {
          cc[j] = id;
          stack.push_back(int(py) * w + px);
        }
      }
    }
    cc_size.push_back(count);
  }
  const int num_cc = int(cc_size.size());

  // Component adjacency.
  std::vector<std::unordered_set<int>> adj(num_cc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int a = cc[size_t(y) * w + x];
      if (x + 1 < w) {
        int b = cc[size_t(y) * w + x + 1];
        if (a != b) {
          adj[a].insert(b);
          adj[b].insert(a);
        }
      }
      if (y + 1 < h) {
        int b = cc[size_t(y + 1) * w + x];
        if (a != b) {
          adj[a].insert(b);
          adj[b].insert(a);
        }
      }
    }
  }

  const size_t min_size =
      std::max<size_t>(1, n / size_t(std::max(1, map.region_count)) / 4);

  // Absorb undersized fragments smallest-first into the largest neighbor.
  std::vector<int> parent(num_cc);
  for (int i = 0; i < num_cc; ++i) parent[i] = i;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  using Entry = std::pair<size_t, int>;  // (size, cc id)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> pq;
  for (int i = 0; i < num_cc; ++i)
    if (cc_size[i] < min_size) pq.push({cc_size[i], i});

  while (!pq.empty()) {
    auto [sz, id] = pq.top();
    pq.pop();
    if (find(id) != id || cc_size[id] != sz) continue;  // stale
    if (cc_size[id] >= min_size) continue;
    // Largest live neighbor; ties favor the smaller id.
    int target = -1;
    size_t target_size = 0;
    for (int nb : adj[id]) {
      int r = find(nb);
      if (r == id) continue;
      if (cc_size[r] > target_size ||
          (cc_size[r] == target_size && (target < 0 || r < target))) {
        target = r;
        target_size = cc_size[r];
      }
    }
    if (target < 0) continue;  // isolated component, nothing to merge into
    parent[id] = target;
    cc_size[target] += cc_size[id];
    for (int nb : adj[id]) {
      int r = find(nb);
      if (r == target) continue;
      adj[target].insert(r);
      adj[r].insert(target);
      adj[r].erase(id);
    }
    adj[id].clear();
    if (cc_size[target] < min_size) pq.push({cc_size[target], target});
  }

  RegionMap out;
  out.width = w;
  out.height = h;
  out.labels.resize(n);
  std::vector<int> remap(num_cc, -1);
  int next = 0;
  for (size_t i = 0; i < n; ++i) {
    int root = find(cc[i]);
    if (remap[root] < 0) remap[root] = next++;
    out.labels[i] = remap[root];
  }
  out.region_count = next;
  return out;
}

RegionMap merge_similar(const RegionMap& map, const RasterImage& image,
                        double delta_e_threshold) {
  validate_region_map(map);
  if (delta_e_threshold <= 0)
    throw InvalidArgument("merge_similar: threshold must be > 0");
  const int w = map.width, h = map.height;
  const size_t n = size_t(w) * h;
  const LabImage lab = rgb_to_lab(to_rgb(image));
  const int count = map.region_count;

  std::vector<double> sl(count, 0), sa(count, 0), sb(count, 0);
  std::vector<size_t> area(count, 0);
  for (size_t i = 0; i < n; ++i) {
    int r = map.labels[i];
    sl[r] += lab.L[i];
    sa[r] += lab.a[i];
    sb[r] += lab.b[i];
    ++area[r];
  }

  std::vector<std::unordered_set<int>> adj(count);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int a = map.labels[size_t(y) * w + x];
      if (x + 1 < w) {
        int b = map.labels[size_t(y) * w + x + 1];
        if (a != b) {
          adj[a].insert(b);
          adj[b].insert(a);
        }
      }
      if (y + 1 < h) {
        int b = map.labels[size_t(y + 1) * w + x];
        if (a != b) {
          adj[a].insert(b);
          adj[b].insert(a);
        }
      }
    }
  }

  std::vector<int> parent(count);
  for (int i = 0; i < count; ++i) parent[i] = i;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<uint32_t> epoch(count, 0);

  auto mean_dist = [&](int a, int b) {
    double dl = sl[a] / area[a] - sl[b] / area[b];
    double da = sa[a] / area[a] - sa[b] / area[b];
    double db = sb[a] / area[a] - sb[b] / area[b];
    return std::sqrt(dl * dl + da * da + db * db);
  };

  struct Edge {
    double d;
    int a, b;
    uint32_t ea, eb;
    bool operator>(const Edge& o) const {
      if (d != o.d) return d > o.d;
      if (a != o.a) return a > o.a;
      return b > o.b;
    }
  };
  std::priority_queue<Edge, std::vector<Edge>, std::greater<Edge>> pq;
  auto push_edge = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    pq.push({mean_dist(a, b), a, b, epoch[a], epoch[b]});
  };
  for (int a = 0; a < count; ++a)
    for (int b : adj[a])
      if (a < b) push_edge(a, b);

  while (!pq.empty()) {
    Edge e = pq.top();
    if (e.d >= delta_e_threshold) break;
    pq.pop();
    int a = find(e.a), b = find(e.b);
    if (a == b || e.ea != epoch[e.a] || e.eb != epoch[e.b]) continue;
    // Survivor keeps the smaller id.
    if (a > b) std::swap(a, b);
    parent[b] = a;
    sl[a] += sl[b];
    sa[a] += sa[b];
    sb[a] += sb[b];
    area[a] += area[b];
    ++epoch[a];
    adj[a].erase(b);
    adj[b].erase(a);
    for (int nb : adj[b]) {
      int r = find(nb);
      if (r == a) continue;
      adj[a].insert(r);
      adj[r].insert(a);
      adj[r].erase(b);
    }
    adj[b].clear();
    for (int nb : adj[a]) {
      int r = find(nb);
      if (r != a) push_edge(a, r);
    }
  }

  RegionMap out;
  out.width = w;
  out.height = h;
  out.labels.resize(n);
  std::vector<int> remap(count, -1);
  int next = 0;
  for (size_t i = 0; i < n; ++i) {
    int root = find(map.labels[i]);
    if (remap[root] < 0) remap[root] = next++;
    out.labels[i] = remap[root];
  }
  out.region_count = next;
  return out;
}

namespace {

// Moore-neighbor tracing, neighbors enumerated clockwise on screen
// (y grows downward): E, SE, S, SW, W, NW, N, NE.
const int kDirX[8] = {1, 1, 0, -1, -1, -1, 0, 1};
const int kDirY[8] = {0, 1, 1, 1, 0, -1, -1, -1};

std::vector<PixelPos> trace_boundary(const RegionMap& map, int label,
                                     PixelPos start) {
  const int w = map.width, h = map.height;
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && map.label_at(x, y) == label;
  };

  std::vector<PixelPos> contour;
  contour.push_back(start);

  // The start pixel is the topmost-leftmost one, so its W neighbor is
  // outside the region; begin the clockwise scan just after it.
  PixelPos cur = start;
  int backtrack = 4;  // direction from cur toward the last outside pixel
  int first_dir = -1;
  const size_t max_steps = size_t(w) * h * 4 + 8;
  for (size_t step = 0; step < max_steps; ++step) {
    int found = -1;
    for (int i = 1; i <= 8; ++i) {
      int dir = (backtrack + i) % 8;
      if (inside(cur.x + kDirX[dir], cur.y + kDirY[dir])) {
        found = dir;
        break;
      }
    }
    if (found < 0) return contour;  // isolated pixel
    // The successor state depends only on (pixel, found), so re-taking the
    // first move out of the start pixel means the walk repeats exactly.
    if (cur == start && found == first_dir) break;
    if (first_dir < 0) first_dir = found;
    cur = {cur.x + kDirX[found], cur.y + kDirY[found]};
    // Backtrack = the neighbor scanned just before `found`, seen from the
    // new pixel.
    backtrack = ((found & ~1) + 6) % 8;
    contour.push_back(cur);
  }
  if (contour.size() > 1 && contour.back() == start) contour.pop_back();
  return contour;
}

}  // namespace

std::vector<Region> extract_regions(const RegionMap& map,
                                    const RasterImage& image) {
  validate_region_map(map);
  if (map.width != image.width || map.height != image.height)
    throw InvalidArgument("extract_regions: map/image size mismatch");
  const int w = map.width, h = map.height;
  const LabImage lab = rgb_to_lab(to_rgb(image));

  std::vector<Region> regions(map.region_count);
  for (int r = 0; r < map.region_count; ++r) regions[r].id = r;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      size_t i = size_t(y) * w + x;
      Region& reg = regions[map.labels[i]];
      if (reg.pixels.empty()) {
        // First pixel in raster scan = topmost-leftmost, tracing start.
        reg.boundary = trace_boundary(map, map.labels[i], {x, y});
      }
      reg.pixels.push_back({x, y});
      reg.bbox.expand(x, y);
      reg.area += 1;
      reg.mean_lab.L += lab.L[i];
      reg.mean_lab.a += lab.a[i];
      reg.mean_lab.b += lab.b[i];
    }
  }
  for (Region& reg : regions) {
    double inv = 1.0 / double(reg.area);
    reg.mean_lab.L *= inv;
    reg.mean_lab.a *= inv;
    reg.mean_lab.b *= inv;
  }
  return regions;
}

void validate_region_map(const RegionMap& map) {
  if (map.width <= 0 || map.height <= 0 ||
      map.labels.size() != size_t(map.width) * map.height)
    throw InvalidArgument("RegionMap: dimension/label size mismatch");
  if (map.region_count <= 0)
    throw InvalidArgument("RegionMap: region_count must be positive");
  std::vector<bool> used(map.region_count, false);
  for (int l : map.labels) {
    if (l < 0 || l >= map.region_count)
      throw InvalidArgument("RegionMap: label out of range");
    used[l] = true;
  }
  for (int r = 0; r < map.region_count; ++r)
    if (!used[r]) throw InvalidArgument("RegionMap: unused label id");
}

int scaled_superpixel_count(int k_at_512, size_t pixel_count) {
  double scale = double(pixel_count) / double(512.0 * 512.0);
  return std::max(1, int(std::lround(k_at_512 * scale)));
}

void dump_region_map_png(const RegionMap& map, const std::string& path) {
  std::vector<uint8_t> idx(map.labels.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = uint8_t(map.labels[i] & 0xff);
  save_indexed_png(idx, map.width, map.height, path);
}

}  // namespace textsynth
