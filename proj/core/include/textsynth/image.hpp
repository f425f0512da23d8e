// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "textsynth/error.hpp"

namespace textsynth {

// Raster image with normalized float samples. Values live in [0,1];
// 8-bit quantization happens only at I/O boundaries.
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<float> data;  // row-major, channel-interleaved

  RasterImage() = default;
  RasterImage(int w, int h, int c, float fill = 0.f)
      : width(w), height(h), channels(c),
        data(size_t(w) * size_t(h) * size_t(c), fill) {}

  float at(int x, int y, int c = 0) const {
    return data[(size_t(y) * width + x) * channels + c];
  }
  float& at(int x, int y, int c = 0) {
    return data[(size_t(y) * width + x) * channels + c];
  }
  size_t pixel_count() const { return size_t(width) * size_t(height); }
  bool empty() const { return data.empty(); }
};

struct LabColor {
  double L = 0;  // [0,100]
  double a = 0;
  double b = 0;
};

// Per-pixel CIE Lab planes (D65, sRGB transfer).
struct LabImage {
  int width = 0;
  int height = 0;
  std::vector<double> L, a, b;

  LabColor at(size_t i) const { return {L[i], a[i], b[i]}; }
};

// Decodes PNG or JPEG (sniffed from the file signature) to normalized
// floats, v/255 per 8-bit sample. Palette PNGs are expanded to RGB,
// alpha is dropped.
RasterImage load_image(const std::string& path);

// Lossless 8-bit PNG. round(v*255) per sample.
void save_png(const RasterImage& image, const std::string& path);

void save_jpeg(const RasterImage& image, const std::string& path,
               int quality = 92);

// Reads a palette PNG without expanding the palette; each pixel is the
// palette index. Rejects non-indexed files.
struct IndexedImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> indices;
};
IndexedImage load_indexed_png(const std::string& path);

// Writes label data as an indexed PNG (label = palette index, <=256 labels).
void save_indexed_png(const std::vector<uint8_t>& indices, int width,
                      int height, const std::string& path);

// Single-color conversions.
LabColor rgb_to_lab(double r, double g, double b);
void lab_to_rgb(const LabColor& lab, double& r, double& g, double& b);

// Whole-image conversion. Rejects grayscale input.
LabImage rgb_to_lab(const RasterImage& image);

// Bilinear interpolation of the 4 neighbors at a continuous point.
// `out` must hold image.channels values. The point must lie inside
// [0,width-1] x [0,height-1].
void bilinear_sample(const RasterImage& image, double x, double y,
                     std::span<float> out);

// Grayscale copy (Rec. 601 luma) used where a single plane is needed.
RasterImage to_gray(const RasterImage& image);

// Replicates a gray image to 3 channels; returns RGB input unchanged.
RasterImage to_rgb(const RasterImage& image);

}  // namespace textsynth
