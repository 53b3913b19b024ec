#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amodal/scenegen.hpp"

namespace amodal {

// On-disk layout:
//   <root>/manifest.json   {format_version, config, count, samples:[{index, files:{name:{crc32, bytes}}}]}
//   <root>/<idx>/scene.json
//   <root>/<idx>/image.png                         8-bit grayscale, canvas_size^2
//   <root>/<idx>/{fg,occ}_{class,instance}.png     16-bit grayscale, label_size^2
// Label values: 0 = background/none, v > 0 = id v-1.
inline constexpr int kDatasetFormatVersion = 1;

struct Dataset {
  SceneConfig config;
  std::vector<Sample> samples;
};

// Generates samples 0..count-1 of `config` and writes them.
void generate_dataset(const std::filesystem::path& root, const SceneConfig& config, int count);
void write_dataset(const std::filesystem::path& root, const SceneConfig& config,
                   const std::vector<Sample>& samples);

// Errors: kIo (unreadable), kFormat (version mismatch, truncated or corrupt
// file), kChecksum (content mismatch). Messages name the sample index.
Dataset read_dataset(const std::filesystem::path& root);

// Hex CRC-32 of manifest.json; identical datasets give identical hashes.
std::string manifest_hash(const std::filesystem::path& root);

std::uint32_t crc32_bytes(const std::vector<std::uint8_t>& bytes);

}  // namespace amodal
