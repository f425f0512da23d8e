// Copyright (c) 2026 the textsynth authors
// Licensed under the Apache License, Version 2.0.

#include "textsynth/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

namespace textsynth {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open file: " + path);
  return f;
}

void png_error_fn(png_structp png, png_const_charp msg) {
  (void)msg;
  longjmp(png_jmpbuf(png), 1);
}
void png_warn_fn(png_structp, png_const_charp) {}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  longjmp(err->jump, 1);
}

bool is_png_signature(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  unsigned char sig[8] = {0};
  size_t n = std::fread(sig, 1, 8, f.get());
  if (n < 8) throw IoError("unsupported or corrupt image file: " + path);
  return png_sig_cmp(sig, 0, 8) == 0;
}

RasterImage from_bytes(const std::vector<uint8_t>& bytes, int w, int h,
                       int channels) {
  RasterImage img(w, h, channels);
  const float inv = 1.f / 255.f;
  for (size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] * inv;
  return img;
}

RasterImage load_png_file(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           png_error_fn, png_warn_fn);
  if (!png) throw IoError("libpng init failed: " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed: " + path);
  }
  std::vector<uint8_t> bytes;
  std::vector<png_bytep> rows;
  int w = 0, h = 0, channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported or corrupt PNG: " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  w = int(png_get_image_width(png, info));
  h = int(png_get_image_height(png, info));
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  channels = int(png_get_channels(png, info));
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG channel layout: " + path);
  }
  bytes.resize(size_t(w) * h * channels);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = bytes.data() + size_t(y) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_bytes(bytes, w, h, channels);
}

RasterImage load_jpeg_file(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("unsupported or corrupt JPEG: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  int w = int(cinfo.output_width);
  int h = int(cinfo.output_height);
  int channels = int(cinfo.output_components);
  std::vector<uint8_t> bytes(size_t(w) * h * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = bytes.data() + size_t(cinfo.output_scanline) * w * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_bytes(bytes, w, h, channels);
}

uint8_t quantize(float v) {
  float c = std::clamp(v, 0.f, 1.f);
  return uint8_t(std::lround(c * 255.f));
}

}  // namespace

RasterImage load_image(const std::string& path) {
  RasterImage img =
      is_png_signature(path) ? load_png_file(path) : load_jpeg_file(path);
  return img;
}

void save_png(const RasterImage& image, const std::string& path) {
  if (image.empty()) throw InvalidArgument("save_png: empty image");
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            png_error_fn, png_warn_fn);
  if (!png) throw IoError("libpng init failed: " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed: " + path);
  }
  std::vector<uint8_t> bytes(image.data.size());
  std::vector<png_bytep> rows(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path);
  }
  png_init_io(png, f.get());
  int color = image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, image.width, image.height, 8, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  for (size_t i = 0; i < image.data.size(); ++i) bytes[i] = quantize(image.data[i]);
  for (int y = 0; y < image.height; ++y)
    rows[y] = bytes.data() + size_t(y) * image.width * image.channels;
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_jpeg(const RasterImage& image, const std::string& path, int quality) {
  if (image.empty()) throw InvalidArgument("save_jpeg: empty image");
  FilePtr f = open_file(path, "wb");
  jpeg_compress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    throw IoError("JPEG write failed: " + path);
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f.get());
  cinfo.image_width = JDIMENSION(image.width);
  cinfo.image_height = JDIMENSION(image.height);
  cinfo.input_components = image.channels;
  cinfo.in_color_space = image.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<uint8_t> row(size_t(image.width) * image.channels);
  while (cinfo.next_scanline < cinfo.image_height) {
    const float* src =
        image.data.data() + size_t(cinfo.next_scanline) * image.width * image.channels;
    for (size_t i = 0; i < row.size(); ++i) row[i] = quantize(src[i]);
    JSAMPROW rp = row.data();
    jpeg_write_scanlines(&cinfo, &rp, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

IndexedImage load_indexed_png(const std::string& path) {
  if (!is_png_signature(path)) throw IoError("not a PNG file: " + path);
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           png_error_fn, png_warn_fn);
  if (!png) throw IoError("libpng init failed: " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed: " + path);
  }
  IndexedImage out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported or corrupt PNG: " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  int color = png_get_color_type(png, info);
  // Grayscale is accepted as well: the sample value is the index. This is
  // how several public semantic-segmentation tools emit label maps.
  if (color != PNG_COLOR_TYPE_PALETTE && color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("semantic map must be an indexed or grayscale PNG: " + path);
  }
  if (png_get_bit_depth(png, info) < 8) png_set_packing(png);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  png_read_update_info(png, info);
  out.width = int(png_get_image_width(png, info));
  out.height = int(png_get_image_height(png, info));
  out.indices.resize(size_t(out.width) * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y)
    rows[y] = out.indices.data() + size_t(y) * out.width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void save_indexed_png(const std::vector<uint8_t>& indices, int width,
                      int height, const std::string& path) {
  if (size_t(width) * height != indices.size())
    throw InvalidArgument("save_indexed_png: size mismatch");
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            png_error_fn, png_warn_fn);
  if (!png) throw IoError("libpng init failed: " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed: " + path);
  }
  std::vector<png_bytep> rows(height);
  png_color palette[256];
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_PALETTE,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  // A fixed high-contrast palette; index i scrambled over hue for viewing.
  for (int i = 0; i < 256; ++i) {
    palette[i].red = png_byte((i * 97 + 31) & 0xff);
    palette[i].green = png_byte((i * 57 + 103) & 0xff);
    palette[i].blue = png_byte((i * 233 + 197) & 0xff);
  }
  png_set_PLTE(png, info, palette, 256);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(indices.data() + size_t(y) * width);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}
double linear_to_srgb(double v) {
  return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

// D65 reference white.
constexpr double kXr = 0.95047;
constexpr double kYr = 1.0;
constexpr double kZr = 1.08883;
constexpr double kEps = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

double lab_f(double t) {
  return t > kEps ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}
double lab_f_inv(double ft) {
  double t3 = ft * ft * ft;
  return t3 > kEps ? t3 : (116.0 * ft - 16.0) / kKappa;
}

}  // namespace

LabColor rgb_to_lab(double r, double g, double b) {
  double rl = srgb_to_linear(r), gl = srgb_to_linear(g), bl = srgb_to_linear(b);
  double x = rl * 0.4124564 + gl * 0.3575761 + bl * 0.1804375;
  double y = rl * 0.2126729 + gl * 0.7151522 + bl * 0.0721750;
  double z = rl * 0.0193339 + gl * 0.1191920 + bl * 0.9503041;
  double fx = lab_f(x / kXr), fy = lab_f(y / kYr), fz = lab_f(z / kZr);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

void lab_to_rgb(const LabColor& lab, double& r, double& g, double& b) {
  double fy = (lab.L + 16.0) / 116.0;
  double fx = fy + lab.a / 500.0;
  double fz = fy - lab.b / 200.0;
  double x = kXr * lab_f_inv(fx);
  double y = kYr * (lab.L > kKappa * kEps ? std::pow(fy, 3.0) : lab.L / kKappa);
  double z = kZr * lab_f_inv(fz);
  double rl = x * 3.2404542 + y * -1.5371385 + z * -0.4985314;
  double gl = x * -0.9692660 + y * 1.8760108 + z * 0.0415560;
  double bl = x * 0.0556434 + y * -0.2040259 + z * 1.0572252;
  r = linear_to_srgb(std::clamp(rl, 0.0, 1.0));
  g = linear_to_srgb(std::clamp(gl, 0.0, 1.0));
  b = linear_to_srgb(std::clamp(bl, 0.0, 1.0));
}

LabImage rgb_to_lab(const RasterImage& image) {
  if (image.channels != 3)
    throw InvalidArgument("rgb_to_lab: expected a 3-channel image");
  LabImage lab;
  lab.width = image.width;
  lab.height = image.height;
  size_t n = image.pixel_count();
  lab.L.resize(n);
  lab.a.resize(n);
  lab.b.resize(n);
  for (size_t i = 0; i < n; ++i) {
    LabColor c = rgb_to_lab(image.data[3 * i], image.data[3 * i + 1],
                            image.data[3 * i + 2]);
    lab.L[i] = c.L;
    lab.a[i] = c.a;
    lab.b[i] = c.b;
  }
  return lab;
}

void bilinear_sample(const RasterImage& image, double x, double y,
                     std::span<float> out) {
  if (x < 0 || y < 0 || x > image.width - 1 || y > image.height - 1)
    throw InvalidArgument("bilinear_sample: point out of bounds");
  int x0 = int(x), y0 = int(y);
  int x1 = std::min(x0 + 1, image.width - 1);
  int y1 = std::min(y0 + 1, image.height - 1);
  double fx = x - x0, fy = y - y0;
  for (int c = 0; c < image.channels; ++c) {
    double v00 = image.at(x0, y0, c), v10 = image.at(x1, y0, c);
    double v01 = image.at(x0, y1, c), v11 = image.at(x1, y1, c);
    out[c] = float((v00 * (1 - fx) + v10 * fx) * (1 - fy) +
                   (v01 * (1 - fx) + v11 * fx) * fy);
  }
}

RasterImage to_gray(const RasterImage& image) {
  if (image.channels == 1) return image;
  RasterImage gray(image.width, image.height, 1);
  for (size_t i = 0; i < image.pixel_count(); ++i) {
    gray.data[i] = float(0.299 * image.data[3 * i] + 0.587 * image.data[3 * i + 1] +
                         0.114 * image.data[3 * i + 2]);
  }
  return gray;
}

RasterImage to_rgb(const RasterImage& image) {
  if (image.channels == 3) return image;
  RasterImage rgb(image.width, image.height, 3);
  for (size_t i = 0; i < image.pixel_count(); ++i) {
    rgb.data[3 * i] = rgb.data[3 * i + 1] = rgb.data[3 * i + 2] = image.data[i];
  }
  return rgb;
}

}  // namespace textsynth
