#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "evdeblur/errors.hpp"

namespace evdeblur {

/// Interleaved row-major float image, linear intensities.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }

  void clamp01() {
    for (float& v : data) v = std::clamp(v, 0.0f, 1.0f);
  }
};

}  // namespace evdeblur
