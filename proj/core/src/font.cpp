// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/font.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <unordered_map>

#include "textsynth/error.hpp"
#include "textsynth/utf8.hpp"

namespace textsynth {

namespace {

// Big-endian reader with bounds checks.
class Reader {
public:
  Reader(const std::vector<uint8_t>& bytes, size_t offset = 0)
      : bytes_(bytes), pos_(offset) {}

  uint8_t u8() { return need(1), bytes_[pos_++]; }
  uint16_t u16() {
    need(2);
    uint16_t v = uint16_t(bytes_[pos_] << 8 | bytes_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  int16_t i16() { return int16_t(u16()); }
  uint32_t u32() {
    need(4);
    uint32_t v = uint32_t(bytes_[pos_]) << 24 | uint32_t(bytes_[pos_ + 1]) << 16 |
                 uint32_t(bytes_[pos_ + 2]) << 8 | uint32_t(bytes_[pos_ + 3]);
    pos_ += 4;
    return v;
  }
  double f2dot14() { return double(i16()) / 16384.0; }
  void skip(size_t n) { need(n), pos_ += n; }
  void seek(size_t pos) { pos_ = pos; }
  size_t pos() const { return pos_; }

private:
  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("corrupt font file: overrun");
  }
  const std::vector<uint8_t>& bytes_;
  size_t pos_;
};

struct Point {
  double x = 0, y = 0;
  bool on_curve = true;
};

using Contour = std::vector<Point>;

struct Glyph {
  std::vector<Contour> contours;  // font units, y up
  double advance = 0;
};

struct Affine {
  // x' = a*x + b*y + dx ; y' = c*x + d*y + dy
  double a = 1, b = 0, c = 0, d = 1, dx = 0, dy = 0;
};

}  // namespace

struct Font::Impl {
  std::string path;
  std::vector<uint8_t> bytes;
  std::unordered_map<std::string, std::pair<uint32_t, uint32_t>> tables;
  int units_per_em = 1000;
  int num_glyphs = 0;
  int index_to_loc_format = 0;
  int num_hmetrics = 0;
  std::map<uint32_t, uint16_t> cmap;  // codepoint -> glyph id
  uint32_t loca_offset = 0;
  uint32_t glyf_offset = 0;
  uint32_t hmtx_offset = 0;

  uint32_t glyph_data_offset(int gid, uint32_t* length) const {
    uint32_t o0, o1;
    if (index_to_loc_format == 0) {
      Reader r(bytes, loca_offset + size_t(gid) * 2);
      o0 = uint32_t(r.u16()) * 2;
      o1 = uint32_t(r.u16()) * 2;
    } else {
      Reader r(bytes, loca_offset + size_t(gid) * 4);
      o0 = r.u32();
      o1 = r.u32();
    }
    *length = o1 - o0;
    return glyf_offset + o0;
  }

  double advance_width(int gid) const {
    int idx = std::min(gid, num_hmetrics - 1);
    return Reader(bytes, hmtx_offset + size_t(idx) * 4).u16();
  }

  void parse_outline(int gid, const Affine& xf, int depth,
                     std::vector<Contour>* out) const;
  Glyph load_glyph(int gid) const;
};

namespace {

void parse_cmap(const std::vector<uint8_t>& bytes, uint32_t cmap_offset,
                std::map<uint32_t, uint16_t>* table) {
  Reader r(bytes, cmap_offset);
  r.u16();  // version
  int n = r.u16();
  uint32_t best = 0;
  int best_rank = -1;
  for (int i = 0; i < n; ++i) {
    int platform = r.u16();
    int encoding = r.u16();
    uint32_t offset = r.u32();
    // Prefer Windows BMP, then Unicode; take the last best-ranked one.
    int rank = -1;
    if (platform == 3 && (encoding == 1 || encoding == 10)) rank = 2;
    if (platform == 0) rank = 1;
    if (rank > best_rank) {
      best_rank = rank;
      best = offset;
    }
  }
  if (best_rank < 0) throw IoError("font has no usable cmap subtable");

  Reader sub(bytes, cmap_offset + best);
  int format = sub.u16();
  if (format == 4) {
    sub.u16();  // length
    sub.u16();  // language
    int seg_x2 = sub.u16();
    int segs = seg_x2 / 2;
    sub.skip(6);  // searchRange, entrySelector, rangeShift
    std::vector<uint32_t> end(segs), start(segs);
    std::vector<int32_t> delta(segs);
    std::vector<uint32_t> range_off(segs), range_pos(segs);
    for (int i = 0; i < segs; ++i) end[i] = sub.u16();
    sub.u16();  // reservedPad
    for (int i = 0; i < segs; ++i) start[i] = sub.u16();
    for (int i = 0; i < segs; ++i) delta[i] = sub.i16();
    for (int i = 0; i < segs; ++i) {
      range_pos[i] = uint32_t(sub.pos());
      range_off[i] = sub.u16();
    }
    for (int i = 0; i < segs; ++i) {
      if (start[i] > end[i]) continue;
      for (uint32_t c = start[i]; c <= end[i] && c != 0xffff; ++c) {
        uint16_t gid;
        if (range_off[i] == 0) {
          gid = uint16_t((int32_t(c) + delta[i]) & 0xffff);
        } else {
          size_t p = range_pos[i] + range_off[i] + 2 * (c - start[i]);
          gid = Reader(bytes, p).u16();
          if (gid != 0) gid = uint16_t((int32_t(gid) + delta[i]) & 0xffff);
        }
        if (gid != 0) (*table)[c] = gid;
      }
    }
  } else if (format == 12) {
    sub.u16();  // reserved
    sub.u32();  // length
    sub.u32();  // language
    uint32_t groups = sub.u32();
    for (uint32_t g = 0; g < groups; ++g) {
      uint32_t s = sub.u32(), e = sub.u32(), gid = sub.u32();
      for (uint32_t c = s; c <= e; ++c) (*table)[c] = uint16_t(gid + (c - s));
    }
  } else {
    throw IoError("unsupported cmap subtable format " + std::to_string(format));
  }
}

}  // namespace

void Font::Impl::parse_outline(int gid, const Affine& xf, int depth,
                               std::vector<Contour>* out) const {
  if (depth > 5) throw IoError("composite glyph nesting too deep");
  if (gid < 0 || gid >= num_glyphs)
    throw IoError("glyph id out of range in font " + path);
  uint32_t length = 0;
  uint32_t offset = glyph_data_offset(gid, &length);
  if (length == 0) return;  // empty glyph (e.g. space)

  Reader r(bytes, offset);
  int ncont = r.i16();
  r.skip(8);  // bbox

  auto apply = [&xf](double x, double y) {
    return Point{xf.a * x + xf.b * y + xf.dx, xf.c * x + xf.d * y + xf.dy};
  };

  if (ncont >= 0) {
    std::vector<int> ends(ncont);
    for (int i = 0; i < ncont; ++i) ends[i] = r.u16();
    int npts = ncont == 0 ? 0 : ends.back() + 1;
    r.skip(r.u16());  // instructions

    std::vector<uint8_t> flags;
    flags.reserve(npts);
    while (int(flags.size()) < npts) {
      uint8_t f = r.u8();
      flags.push_back(f);
      if (f & 0x08) {  // REPEAT
        int rep = r.u8();
        for (int k = 0; k < rep; ++k) flags.push_back(f);
      }
    }
    std::vector<double> xs(npts), ys(npts);
    double v = 0;
    for (int i = 0; i < npts; ++i) {
      uint8_t f = flags[i];
      if (f & 0x02) {  // short x
        int d = r.u8();
        v += (f & 0x10) ? d : -d;
      } else if (!(f & 0x10)) {
        v += r.i16();
      }
      xs[i] = v;
    }
    v = 0;
    for (int i = 0; i < npts; ++i) {
      uint8_t f = flags[i];
      if (f & 0x04) {  // short y
        int d = r.u8();
        v += (f & 0x20) ? d : -d;
      } else if (!(f & 0x20)) {
        v += r.i16();
      }
      ys[i] = v;
    }
    int first = 0;
    for (int ci = 0; ci < ncont; ++ci) {
      Contour contour;
      for (int i = first; i <= ends[ci]; ++i) {
        Point p = apply(xs[i], ys[i]);
        p.on_curve = (flags[i] & 0x01) != 0;
        contour.push_back(p);
      }
      if (!contour.empty()) out->push_back(std::move(contour));
      first = ends[ci] + 1;
    }
    return;
  }

  // Composite glyph: accumulate transformed component outlines.
  while (true) {
    uint16_t flags = r.u16();
    uint16_t child = r.u16();
    Affine comp;
    if (flags & 0x0001) {  // ARG_1_AND_2_ARE_WORDS
      if (flags & 0x0002) {  // ARGS_ARE_XY_VALUES
        comp.dx = r.i16();
        comp.dy = r.i16();
      } else {
        r.skip(4);  // point matching unsupported; offsets stay 0
      }
    } else {
      if (flags & 0x0002) {
        comp.dx = int8_t(r.u8());
        comp.dy = int8_t(r.u8());
      } else {
        r.skip(2);
      }
    }
    if (flags & 0x0008) {  // WE_HAVE_A_SCALE
      comp.a = comp.d = r.f2dot14();
    } else if (flags & 0x0040) {  // X_AND_Y_SCALE
      comp.a = r.f2dot14();
      comp.d = r.f2dot14();
    } else if (flags & 0x0080) {  // TWO_BY_TWO
      comp.a = r.f2dot14();
      comp.c = r.f2dot14();
      comp.b = r.f2dot14();
      comp.d = r.f2dot14();
    }
    // Compose: child point -> comp -> xf.
    Affine total;
    total.a = xf.a * comp.a + xf.b * comp.c;
    total.b = xf.a * comp.b + xf.b * comp.d;
    total.c = xf.c * comp.a + xf.d * comp.c;
    total.d = xf.c * comp.b + xf.d * comp.d;
    total.dx = xf.a * comp.dx + xf.b * comp.dy + xf.dx;
    total.dy = xf.c * comp.dx + xf.d * comp.dy + xf.dy;
    parse_outline(child, total, depth + 1, out);
    if (!(flags & 0x0020)) break;  // MORE_COMPONENTS
  }
}

Glyph Font::Impl::load_glyph(int gid) const {
  Glyph g;
  g.advance = advance_width(gid);
  parse_outline(gid, Affine{}, 0, &g.contours);
  return g;
}

Font::Font() : impl_(new Impl) {}
Font::~Font() = default;
Font::Font(Font&&) noexcept = default;
Font& Font::operator=(Font&&) noexcept = default;

Font Font::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open font file: " + path);
  Font font;
  Impl& impl = *font.impl_;
  impl.path = path;
  impl.bytes.assign(std::istreambuf_iterator<char>(in),
                    std::istreambuf_iterator<char>());
  if (impl.bytes.size() < 12) throw IoError("corrupt font file: " + path);

  Reader r(impl.bytes);
  uint32_t version = r.u32();
  if (version != 0x00010000 && version != 0x74727565)  // 1.0 or 'true'
    throw IoError("unsupported font format (need TrueType outlines): " + path);
  int num_tables = r.u16();
  r.skip(6);
  for (int i = 0; i < num_tables; ++i) {
    char tag[5] = {0};
    for (int k = 0; k < 4; ++k) tag[k] = char(r.u8());
    r.u32();  // checksum
    uint32_t offset = r.u32();
    uint32_t length = r.u32();
    impl.tables[tag] = {offset, length};
  }
  auto table = [&](const char* name) -> uint32_t {
    auto it = impl.tables.find(name);
    if (it == impl.tables.end())
      throw IoError(std::string("font missing required table ") + name + ": " +
                    path);
    return it->second.first;
  };

  Reader head(impl.bytes, table("head"));
  head.skip(18);
  impl.units_per_em = head.u16();
  head.skip(30);
  impl.index_to_loc_format = head.i16();

  Reader maxp(impl.bytes, table("maxp"));
  maxp.skip(4);
  impl.num_glyphs = maxp.u16();

  Reader hhea(impl.bytes, table("hhea"));
  hhea.skip(34);
  impl.num_hmetrics = hhea.u16();
  if (impl.num_hmetrics < 1) throw IoError("corrupt hhea table: " + path);

  impl.loca_offset = table("loca");
  impl.glyf_offset = table("glyf");
  impl.hmtx_offset = table("hmtx");
  parse_cmap(impl.bytes, table("cmap"), &impl.cmap);
  if (impl.units_per_em <= 0) throw IoError("corrupt head table: " + path);
  return font;
}

bool Font::covers(const std::string& text) const {
  for (uint32_t cp : utf8_decode(text))
    if (!impl_->cmap.count(cp)) return false;
  return true;
}

const std::string& Font::path() const { return impl_->path; }
int Font::units_per_em() const { return impl_->units_per_em; }

namespace {

// One line segment of a flattened outline, in mask pixel coordinates.
struct Edge {
  double x0, y0, x1, y1;  // y0 < y1; winding +1 if the original edge went down
  int winding;
};

void add_edge(std::vector<Edge>* edges, double x0, double y0, double x1,
              double y1) {
  if (y0 == y1) return;  // horizontal edges never cross a scanline
  if (y0 < y1)
    edges->push_back({x0, y0, x1, y1, +1});
  else
    edges->push_back({x1, y1, x0, y0, -1});
}

void flatten_quadratic(std::vector<Edge>* edges, double x0, double y0,
                       double cx, double cy, double x1, double y1) {
  // Subdivision count from the control-net deviation; 0.1 px tolerance.
  double dev = std::hypot(x0 - 2 * cx + x1, y0 - 2 * cy + y1);
  int n = std::max(1, int(std::ceil(std::sqrt(dev / 0.4))));
  double px = x0, py = y0;
  for (int i = 1; i <= n; ++i) {
    double t = double(i) / n;
    double mt = 1 - t;
    double qx = mt * mt * x0 + 2 * mt * t * cx + t * t * x1;
    double qy = mt * mt * y0 + 2 * mt * t * cy + t * t * y1;
    add_edge(edges, px, py, qx, qy);
    px = qx;
    py = qy;
  }
}

// Flattens a TrueType quadratic contour (already in pixel coordinates)
// into line edges. Consecutive off-curve points imply on-curve midpoints.
void flatten_contour(const Contour& contour, std::vector<Edge>* edges) {
  const int n = int(contour.size());
  if (n < 2) return;

  // Find a starting on-curve point; if none, synthesize one.
  int start = -1;
  for (int i = 0; i < n; ++i)
    if (contour[i].on_curve) {
      start = i;
      break;
    }
  Point first;
  if (start < 0) {
    first = {(contour[0].x + contour[n - 1].x) / 2,
             (contour[0].y + contour[n - 1].y) / 2, true};
    start = 0;
  } else {
    first = contour[start];
    start = (start + 1) % n;
  }

  Point cur = first;
  Point pending_ctrl;
  bool have_ctrl = false;
  for (int k = 0; k < n; ++k) {
    const Point& p = contour[(start + k) % n];
    if (p.on_curve) {
      if (have_ctrl) {
        flatten_quadratic(edges, cur.x, cur.y, pending_ctrl.x, pending_ctrl.y,
                          p.x, p.y);
        have_ctrl = false;
      } else {
        add_edge(edges, cur.x, cur.y, p.x, p.y);
      }
      cur = p;
    } else {
      if (have_ctrl) {
        Point mid{(pending_ctrl.x + p.x) / 2, (pending_ctrl.y + p.y) / 2, true};
        flatten_quadratic(edges, cur.x, cur.y, pending_ctrl.x, pending_ctrl.y,
                          mid.x, mid.y);
        cur = mid;
      }
      pending_ctrl = p;
      have_ctrl = true;
    }
  }
  // Close back to the first point.
  if (have_ctrl)
    flatten_quadratic(edges, cur.x, cur.y, pending_ctrl.x, pending_ctrl.y,
                      first.x, first.y);
  else
    add_edge(edges, cur.x, cur.y, first.x, first.y);
}

// Non-zero-winding coverage of the edge set over a w x h pixel grid,
// 4x4 subsamples per pixel. Returns per-pixel coverage in [0,1].
std::vector<float> rasterize_coverage(const std::vector<Edge>& edges, int w,
                                      int h) {
  std::vector<float> cov(size_t(w) * h, 0.f);
  if (edges.empty()) return cov;
  constexpr int kSub = 4;
  std::vector<std::pair<double, int>> crossings;
  for (int sy = 0; sy < h * kSub; ++sy) {
    double y = (sy + 0.5) / kSub;
    crossings.clear();
    for (const Edge& e : edges) {
      if (y < e.y0 || y >= e.y1) continue;
      double t = (y - e.y0) / (e.y1 - e.y0);
      crossings.push_back({e.x0 + t * (e.x1 - e.x0), e.winding});
    }
    if (crossings.empty()) continue;
    std::sort(crossings.begin(), crossings.end());
    int winding = 0;
    size_t ci = 0;
    // Walk subsample centers left to right, advancing through crossings.
    for (int sx = 0; sx < w * kSub; ++sx) {
      double x = (sx + 0.5) / kSub;
      while (ci < crossings.size() && crossings[ci].first <= x)
        winding += crossings[ci++].second;
      if (winding != 0) cov[size_t(sy / kSub) * w + sx / kSub] += 1.f;
    }
  }
  for (float& c : cov) c /= float(kSub * kSub);
  return cov;
}

}  // namespace

TextMask rasterize_text(const std::string& text, const Font& font,
                        int px_height) {
  if (text.empty()) throw InvalidArgument("rasterize_text: empty text");
  if (px_height < 8)
    throw InvalidArgument("rasterize_text: px_height must be >= 8");

  const Font::Impl& impl = *font.impl_;
  const std::vector<uint32_t> cps = utf8_decode(text);
  const double scale = double(px_height) / impl.units_per_em;

  // Place glyphs on a common baseline, y flipped to image coordinates.
  struct Placed {
    std::vector<Edge> edges;
    double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
  };
  std::vector<Placed> placed;
  double pen = 0;
  double all_min_x = 1e30, all_min_y = 1e30, all_max_x = -1e30,
         all_max_y = -1e30;
  for (uint32_t cp : cps) {
    auto it = impl.cmap.find(cp);
    if (it == impl.cmap.end()) {
      std::string ch;
      utf8_append(ch, cp);
      throw Error("font " + impl.path + " has no glyph for character '" + ch +
                  "'");
    }
    Glyph g = impl.load_glyph(it->second);
    if (!g.contours.empty()) {
      Placed pl;
      for (Contour& contour : g.contours) {
        for (Point& p : contour) {
          double x = (pen + p.x) * scale;
          double y = -p.y * scale;  // baseline at y = 0, y grows down
          p.x = x;
          p.y = y;
          pl.min_x = std::min(pl.min_x, x);
          pl.max_x = std::max(pl.max_x, x);
          pl.min_y = std::min(pl.min_y, y);
          pl.max_y = std::max(pl.max_y, y);
        }
        flatten_contour(contour, &pl.edges);
      }
      all_min_x = std::min(all_min_x, pl.min_x);
      all_max_x = std::max(all_max_x, pl.max_x);
      all_min_y = std::min(all_min_y, pl.min_y);
      all_max_y = std::max(all_max_y, pl.max_y);
      placed.push_back(std::move(pl));
    }
    pen += g.advance;
  }
  if (placed.empty())
    throw Error("rasterize_text: no renderable glyphs in \"" + text + "\"");

  // Tight canvas with a 1-px margin.
  const double off_x = 1.0 - std::floor(all_min_x);
  const double off_y = 1.0 - std::floor(all_min_y);
  TextMask out;
  out.width = int(std::ceil(all_max_x + off_x)) + 1;
  out.height = int(std::ceil(all_max_y + off_y)) + 1;
  out.px_height = px_height;
  out.transcript = text;
  out.baseline_y = int(std::lround(off_y));
  out.mask.assign(size_t(out.width) * out.height, 0);

  for (Placed& pl : placed) {
    for (Edge& e : pl.edges) {
      e.x0 += off_x;
      e.x1 += off_x;
      e.y0 += off_y;
      e.y1 += off_y;
    }
    std::vector<float> cov = rasterize_coverage(pl.edges, out.width, out.height);
    PixelBox box;
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        if (cov[size_t(y) * out.width + x] >= 0.5f) {
          out.mask[size_t(y) * out.width + x] = 1;
          box.expand(x, y);
        }
      }
    }
    if (!box.valid()) {
      // Sub-coverage glyph (tiny punctuation): fall back to the outline
      // bbox so the char box count still matches the transcript.
      box.x0 = std::clamp(int(std::floor(pl.min_x + off_x)), 0, out.width - 1);
      box.x1 = std::clamp(int(std::ceil(pl.max_x + off_x)), 0, out.width - 1);
      box.y0 = std::clamp(int(std::floor(pl.min_y + off_y)), 0, out.height - 1);
      box.y1 = std::clamp(int(std::ceil(pl.max_y + off_y)), 0, out.height - 1);
    }
    out.char_boxes.push_back(box);
  }
  return out;
}

std::vector<std::string> list_font_files(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a font directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == ".ttf" || ext == ".otf") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no font files in directory: " + dir);
  return files;
}

}  // namespace textsynth
