#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "amodal/grid.hpp"

namespace amodal {

// PNG encoding with fixed compression settings, so equal inputs give equal
// bytes. Decoding errors (corrupt or truncated data) throw Error(kFormat).
std::vector<std::uint8_t> encode_png_gray8(const GrayImage& image);
std::vector<std::uint8_t> encode_png_gray16(const LabelMap& labels);
std::vector<std::uint8_t> encode_png_rgb8(int width, int height, const std::vector<std::uint8_t>& rgb);

GrayImage decode_png_gray8(const std::vector<std::uint8_t>& bytes);
LabelMap decode_png_gray16(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace amodal
