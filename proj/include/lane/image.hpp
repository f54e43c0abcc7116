#pragma once

#include <cstdint>
#include <vector>

#include "lane/common.hpp"

namespace lane {

// Interleaved RGB, values in [0,1], row-major from the top-left pixel.
struct Image {
  int width = 0, height = 0;
  std::vector<float> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0.f) {}

  float* pixel(int x, int y) { return rgb.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const float* pixel(int x, int y) const {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
};

// Scalar depth per pixel; 0 marks "no hit" (sky).
struct DepthMap {
  int width = 0, height = 0;
  std::vector<float> depth;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), depth(static_cast<size_t>(w) * h, 0.f) {}

  float& at(int x, int y) { return depth[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return depth[static_cast<size_t>(y) * width + x]; }
};

struct Mask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> on;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), on(static_cast<size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return on[static_cast<size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return on[static_cast<size_t>(y) * width + x]; }
  size_t count() const {
    size_t n = 0;
    for (auto v : on) n += v ? 1 : 0;
    return n;
  }
};

}  // namespace lane
