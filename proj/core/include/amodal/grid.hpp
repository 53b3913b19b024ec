#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace amodal {

// Dense row-major 2-D raster.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const { return data.size(); }
  T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Grid& o) const { return width == o.width && height == o.height; }
  bool operator==(const Grid&) const = default;
};

using Mask = Grid<std::uint8_t>;
using LabelMap = Grid<std::uint16_t>;
using GrayImage = Grid<std::uint8_t>;

inline std::size_t count_nonzero(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.data) n += v != 0;
  return n;
}

// Per-pixel C-vector field stored pixel-major (HWC). Used for both
// embeddings and semantic logits.
struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        values(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  double* pixel(std::size_t p) { return values.data() + p * channels; }
  const double* pixel(std::size_t p) const { return values.data() + p * channels; }
  bool same_shape(const FeatureMap& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  bool operator==(const FeatureMap&) const = default;
};

}  // namespace amodal
