#pragma once

#include "pathgan/core/image.hpp"

namespace demo {

/// Lays images out left to right, top to bottom, with a 2-pixel white gutter.
inline pathgan::Image tile(const std::vector<pathgan::Image>& images, int cols) {
  const int h = images.at(0).height, w = images.at(0).width, gap = 2;
  const int rows = (static_cast<int>(images.size()) + cols - 1) / cols;
  pathgan::Image out(rows * (h + gap) - gap, cols * (w + gap) - gap, 1.0f);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const int r0 = static_cast<int>(i) / cols * (h + gap), c0 = static_cast<int>(i) % cols * (w + gap);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        for (int ch = 0; ch < 3; ++ch) out.at(r0 + r, c0 + c, ch) = images[i].at(r, c, ch);
  }
  return out;
}

} // namespace demo
