#pragma once

#include <cstdint>
#include <vector>

#include "amodal/grid.hpp"

namespace amodal {

// Row-major run lengths of a binary mask, alternating zeros and ones and
// starting with a (possibly empty) run of zeros.
struct Rle {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;

  bool operator==(const Rle&) const = default;
};

Rle encode_rle(const Mask& mask);
// Throws Error(kFormat) when the runs do not cover width * height pixels.
Mask decode_rle(const Rle& rle);

}  // namespace amodal
