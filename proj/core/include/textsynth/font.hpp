// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "textsynth/pixel.hpp"

namespace textsynth {

// Binary text raster: text pixels 1, background 0, with the transcript and
// one axis-aligned box per renderable character.
struct TextMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> mask;  // values are exactly 0 or 1
  std::string transcript;
  std::vector<PixelBox> char_boxes;
  int baseline_y = 0;
  int px_height = 0;  // nominal size the mask was rasterized at

  uint8_t at(int x, int y) const { return mask[size_t(y) * width + x]; }
  size_t set_pixel_count() const {
    size_t n = 0;
    for (uint8_t v : mask) n += v;
    return n;
  }
};

// An immutable TrueType/OpenType (glyf outline) font. Quadratic outlines
// are rasterized with 4x4 supersampled coverage; no hinting, so metrics
// scale linearly with pixel size.
class Font {
public:
  static Font load(const std::string& path);

  // True if the font maps every codepoint of `text` to a glyph.
  bool covers(const std::string& text) const;

  const std::string& path() const;
  int units_per_em() const;

  ~Font();
  Font(Font&&) noexcept;
  Font& operator=(Font&&) noexcept;
  Font(const Font&) = delete;
  Font& operator=(const Font&) = delete;

private:
  Font();
  friend TextMask rasterize_text(const std::string&, const Font&, int);
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Renders `text` on one baseline at nominal pixel size `px_height`
// (glyph coordinates scale by px_height / units_per_em). Anti-aliased
// coverage is thresholded at 0.5 into a binary mask on a tight canvas
// with a 1-px margin. Throws if a glyph is missing (naming the character)
// or if the text is empty.
TextMask rasterize_text(const std::string& text, const Font& font,
                        int px_height);

// All *.ttf / *.otf files under a directory (non-recursive), sorted by
// filename for reproducible sampling.
std::vector<std::string> list_font_files(const std::string& dir);

}  // namespace textsynth
