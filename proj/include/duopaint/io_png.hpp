#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "duopaint/errors.hpp"
#include "duopaint/image.hpp"

namespace duopaint {

// On-disk image conventions: RGB as 8-bit color PNG, depth as 16-bit
// grayscale PNG holding millimeters with 0 = invalid, masks as 8-bit gray.

namespace detail {

struct PngFile {
  std::FILE* fp = nullptr;
  explicit PngFile(const std::string& path, const char* mode)
      : fp(std::fopen(path.c_str(), mode)) {
    if (!fp) raise(ErrorCode::IoError, "cannot open " + path);
  }
  ~PngFile() {
    if (fp) std::fclose(fp);
  }
  PngFile(const PngFile&) = delete;
  PngFile& operator=(const PngFile&) = delete;
};

inline void write_png(const std::string& path, int width, int height,
                      int bit_depth, int color_type,
                      const std::vector<png_bytep>& rows) {
  PngFile file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::IoError, "libpng failed writing " + path);
  }
  png_init_io(png, file.fp);
  png_set_IHDR(png, info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // rows are host little-endian
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngFile file;

  explicit PngReader(const std::string& path) : file(path, "rb") {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 nullptr);
    info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_read_struct(&png, &info, nullptr);
      png = nullptr;
      raise(ErrorCode::IoError, "libpng failed reading " + path);
    }
    png_init_io(png, file.fp);
    png_read_info(png, info);
  }
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
  }
};

}  // namespace detail

inline void write_rgb_png(const std::string& path, const RgbImage& img) {
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(&img.data[static_cast<std::size_t>(y) *
                                              img.width * 3]);
  detail::write_png(path, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

inline void write_mask_png(const std::string& path, const MaskImage& img) {
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] =
        const_cast<png_bytep>(&img.data[static_cast<std::size_t>(y) * img.width]);
  detail::write_png(path, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, rows);
}

inline void write_id_png(const std::string& path, const IdImage& img) {
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(reinterpret_cast<const png_byte*>(
        &img.data[static_cast<std::size_t>(y) * img.width]));
  detail::write_png(path, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

/// Depth in meters -> 16-bit millimeter PNG; values beyond 65.535 m saturate.
inline void write_depth_png(const std::string& path, const DepthImage& img) {
  std::vector<std::uint16_t> mm(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    double v = std::llround(static_cast<double>(img.data[i]) * 1000.0);
    mm[i] = static_cast<std::uint16_t>(std::min(v, 65535.0));
  }
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = reinterpret_cast<png_bytep>(
        &mm[static_cast<std::size_t>(y) * img.width]);
  detail::write_png(path, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

inline RgbImage read_rgb_png(const std::string& path) {
  detail::PngReader r(path);
  png_set_expand(r.png);
  png_set_strip_16(r.png);
  png_set_strip_alpha(r.png);
  png_set_gray_to_rgb(r.png);
  png_read_update_info(r.png, r.info);
  int w = png_get_image_width(r.png, r.info);
  int h = png_get_image_height(r.png, r.info);
  RgbImage img(w, h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = &img.data[static_cast<std::size_t>(y) * w * 3];
  png_read_image(r.png, rows.data());
  return img;
}

inline MaskImage read_mask_png(const std::string& path) {
  detail::PngReader r(path);
  png_set_expand(r.png);
  png_set_strip_16(r.png);
  png_set_strip_alpha(r.png);
  png_set_rgb_to_gray(r.png, 1, -1, -1);
  png_read_update_info(r.png, r.info);
  int w = png_get_image_width(r.png, r.info);
  int h = png_get_image_height(r.png, r.info);
  MaskImage img(w, h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = &img.data[static_cast<std::size_t>(y) * w];
  png_read_image(r.png, rows.data());
  return img;
}

inline std::vector<std::uint16_t> read_gray16_png(const std::string& path,
                                                  int& w, int& h) {
  detail::PngReader r(path);
  if (png_get_bit_depth(r.png, r.info) != 16 ||
      png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY)
    raise(ErrorCode::IoError, path + " is not a 16-bit grayscale PNG");
  png_set_swap(r.png);
  png_read_update_info(r.png, r.info);
  w = png_get_image_width(r.png, r.info);
  h = png_get_image_height(r.png, r.info);
  std::vector<std::uint16_t> raw(static_cast<std::size_t>(w) * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] =
        reinterpret_cast<png_bytep>(&raw[static_cast<std::size_t>(y) * w]);
  png_read_image(r.png, rows.data());
  return raw;
}

inline DepthImage read_depth_png(const std::string& path) {
  int w = 0, h = 0;
  auto mm = read_gray16_png(path, w, h);
  DepthImage img(w, h);
  for (std::size_t i = 0; i < mm.size(); ++i)
    img.data[i] = static_cast<float>(mm[i]) / 1000.f;
  return img;
}

inline IdImage read_id_png(const std::string& path) {
  int w = 0, h = 0;
  auto raw = read_gray16_png(path, w, h);
  IdImage img(w, h);
  img.data = std::move(raw);
  return img;
}

}  // namespace duopaint
