#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pathgan/core/error.hpp"
#include "pathgan/core/tensor.hpp"

namespace pathgan {

/// RGB image, row-major HWC floats in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, float fill = 0.0f) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {
    if (h < 1 || w < 1) throw ArgumentError("image dimensions must be >= 1");
  }

  float& at(int r, int c, int ch) { return pixels[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }
  float at(int r, int c, int ch) const { return pixels[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }

  bool operator==(const Image&) const = default;

  /// 8-bit intensities (0-255), HWC.
  static Image from_u8(int h, int w, std::span<const std::uint8_t> rgb) {
    if (rgb.size() != static_cast<std::size_t>(h) * w * 3) throw ArgumentError("from_u8: buffer size mismatch");
    Image im(h, w);
    for (std::size_t i = 0; i < rgb.size(); ++i) im.pixels[i] = rgb[i] / 255.0f;
    return im;
  }

  std::vector<std::uint8_t> to_u8() const {
    std::vector<std::uint8_t> out(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i)
      out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(pixels[i], 0.0f, 1.0f) * 255.0f));
    return out;
  }

  /// Round-trips through 8 bits, which is what lands on disk.
  Image quantized() const {
    auto q = to_u8();
    return from_u8(height, width, q);
  }
};

/// Images of one size -> NCHW tensor.
inline Tensor to_batch(std::span<const Image> images) {
  if (images.empty()) throw ArgumentError("to_batch: no images");
  const int h = images[0].height, w = images[0].width;
  Tensor t({static_cast<std::int64_t>(images.size()), 3, h, w});
  float* d = t.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& im = images[n];
    if (im.height != h || im.width != w) throw ArgumentError("to_batch: mixed image sizes");
    for (std::size_t p = 0; p < plane; ++p)
      for (int c = 0; c < 3; ++c) d[(n * 3 + c) * plane + p] = im.pixels[p * 3 + c];
  }
  return t;
}

inline Image from_batch(const Tensor& t, std::int64_t index) {
  if (t.rank() != 4 || t.dim(1) != 3) throw ArgumentError("from_batch: expected [N,3,H,W], got " + shape_str(t.shape()));
  const int h = static_cast<int>(t.dim(2)), w = static_cast<int>(t.dim(3));
  Image im(h, w);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const float* d = t.data() + index * 3 * plane;
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) im.pixels[p * 3 + c] = d[c * plane + p];
  return im;
}

inline std::vector<Image> from_batch(const Tensor& t) {
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(t.dim(0)));
  for (std::int64_t i = 0; i < t.dim(0); ++i) out.push_back(from_batch(t, i));
  return out;
}

/// Box-filter resize (area averaging). Exact when the factor is an integer.
inline Image resize_area(const Image& src, int h, int w) {
  if (src.height == h && src.width == w) return src;
  Image out(h, w);
  const double sy = static_cast<double>(src.height) / h, sx = static_cast<double>(src.width) / w;
  for (int r = 0; r < h; ++r) {
    const double y0 = r * sy, y1 = (r + 1) * sy;
    for (int c = 0; c < w; ++c) {
      const double x0 = c * sx, x1 = (c + 1) * sx;
      double acc[3] = {0, 0, 0}, area = 0.0;
      for (int yy = static_cast<int>(y0); yy < std::min<double>(std::ceil(y1), src.height); ++yy) {
        const double wy = std::min<double>(yy + 1, y1) - std::max<double>(yy, y0);
        if (wy <= 0) continue;
        for (int xx = static_cast<int>(x0); xx < std::min<double>(std::ceil(x1), src.width); ++xx) {
          const double wx = std::min<double>(xx + 1, x1) - std::max<double>(xx, x0);
          if (wx <= 0) continue;
          for (int ch = 0; ch < 3; ++ch) acc[ch] += wy * wx * src.at(yy, xx, ch);
          area += wy * wx;
        }
      }
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = static_cast<float>(acc[ch] / area);
    }
  }
  return out;
}

} // namespace pathgan
