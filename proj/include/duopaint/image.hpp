#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "duopaint/errors.hpp"

namespace duopaint {

/// Row-major interleaved image container.
template <typename T, int Channels>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{})
      : width(w), height(h),
        data(static_cast<std::size_t>(w) * h * Channels, fill) {}

  static constexpr int channels() { return Channels; }

  bool empty() const { return data.empty(); }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }

  T& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * Channels + c];
  }
  T at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * Channels + c];
  }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }

  bool same_size(int w, int h) const { return width == w && height == h; }

  friend bool operator==(const Image& a, const Image& b) {
    return a.width == b.width && a.height == b.height && a.data == b.data;
  }
};

using RgbImage = Image<std::uint8_t, 3>;   // 8-bit interleaved RGB
using MaskImage = Image<std::uint8_t, 1>;  // 0 = outside, nonzero = inside
using IdImage = Image<std::uint16_t, 1>;   // per-pixel instance id, 0 = none

/// Depth in meters, 0 encodes invalid (matches the 16-bit mm PNG convention).
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  DepthImage() = default;
  DepthImage(int w, int h, float fill = 0.f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  float at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }

  bool valid_at(int x, int y) const { return at(x, y) > 0.f; }
  bool empty() const { return data.empty(); }

  void validate() const {
    for (float d : data)
      if (!std::isfinite(d) || d < 0.f)
        raise(ErrorCode::InvalidDepth, "depth image holds negative or non-finite value");
  }

  friend bool operator==(const DepthImage& a, const DepthImage& b) {
    return a.width == b.width && a.height == b.height && a.data == b.data;
  }
};

inline MaskImage mask_from_ids(const IdImage& ids) {
  MaskImage m(ids.width, ids.height, 0);
  for (std::size_t i = 0; i < ids.data.size(); ++i)
    m.data[i] = ids.data[i] != 0 ? 255 : 0;
  return m;
}

/// Binary dilation with a square structuring element of half-width r.
inline MaskImage dilate(const MaskImage& mask, int r) {
  if (r <= 0) return mask;
  MaskImage out(mask.width, mask.height, 0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      int x0 = std::max(0, x - r), x1 = std::min(mask.width - 1, x + r);
      int y0 = std::max(0, y - r), y1 = std::min(mask.height - 1, y + r);
      for (int yy = y0; yy <= y1; ++yy)
        for (int xx = x0; xx <= x1; ++xx) out.at(xx, yy) = 255;
    }
  }
  return out;
}

}  // namespace duopaint
