#include "amodal/rle.hpp"

#include <string>

#include "amodal/error.hpp"

namespace amodal {

Rle encode_rle(const Mask& mask) {
  Rle r{mask.width, mask.height, {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (auto v : mask.data) {
    const std::uint8_t b = v != 0;
    if (b != current) {
      r.counts.push_back(run);
      run = 0;
      current = b;
    }
    ++run;
  }
  r.counts.push_back(run);
  return r;
}

Mask decode_rle(const Rle& rle) {
  if (rle.width < 0 || rle.height < 0) throw Error(ErrorKind::kFormat, "rle: negative size");
  Mask m(rle.width, rle.height);
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (auto c : rle.counts) {
    if (pos + c > m.size())
      throw Error(ErrorKind::kFormat, "rle: runs exceed mask size " + std::to_string(m.size()));
    for (std::uint32_t i = 0; i < c; ++i) m[pos++] = value;
    value ^= 1;
  }
  if (pos != m.size())
    throw Error(ErrorKind::kFormat, "rle: runs cover " + std::to_string(pos) + " of " +
                                        std::to_string(m.size()) + " pixels");
  return m;
}

}  // namespace amodal
