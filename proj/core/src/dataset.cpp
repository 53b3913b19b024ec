#include "amodal/dataset.hpp"

#include <zlib.h>

#include <cstdio>

#include "amodal/error.hpp"
#include "amodal/png_io.hpp"
#include "amodal/serialization.hpp"

namespace amodal {

namespace fs = std::filesystem;

namespace {

const char* const kLabelFiles[4] = {"fg_class.png", "occ_class.png", "fg_instance.png",
                                    "occ_instance.png"};

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", v);
  return buf;
}

std::string sample_dir(std::size_t i) { return std::to_string(i); }

}  // namespace

std::uint32_t crc32_bytes(const std::vector<std::uint8_t>& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void generate_dataset(const fs::path& root, const SceneConfig& config, int count) {
  config.validate();
  if (count < 0) throw Error(ErrorKind::kInvalidArgument, "dataset count must be >= 0");
  std::vector<Sample> samples;
  samples.reserve(count);
  for (int i = 0; i < count; ++i) samples.push_back(make_sample(config, static_cast<std::uint64_t>(i)));
  write_dataset(root, config, samples);
}

void write_dataset(const fs::path& root, const SceneConfig& config, const std::vector<Sample>& samples) {
  config.validate();
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + root.string() + ": " + ec.message());
  Json entries = Json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const fs::path dir = root / sample_dir(i);
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files;
    const std::string scene = to_json(s.scene).dump(2) + "\n";
    files.emplace_back("scene.json", std::vector<std::uint8_t>(scene.begin(), scene.end()));
    files.emplace_back("image.png", encode_png_gray8(s.rendered.image));
    const LabelMap* maps[4] = {&s.rendered.fg_class, &s.rendered.occ_class,
                               &s.rendered.fg_instance, &s.rendered.occ_instance};
    for (int k = 0; k < 4; ++k) files.emplace_back(kLabelFiles[k], encode_png_gray16(*maps[k]));
    Json sums = Json::object();
    for (const auto& [name, bytes] : files) {
      write_file(dir / name, bytes);
      sums[name] = {{"crc32", hex32(crc32_bytes(bytes))}, {"bytes", bytes.size()}};
    }
    entries.push_back({{"index", i}, {"files", sums}});
  }
  Json manifest{{"format_version", kDatasetFormatVersion},
                {"config", to_json(config)},
                {"count", samples.size()},
                {"samples", entries}};
  write_file(root / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& root) {
  const Json manifest = parse_json_file(root / "manifest.json");
  Dataset ds;
  int count = 0;
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kDatasetFormatVersion)
      throw Error(ErrorKind::kFormat, "dataset " + root.string() + ": format version " +
                                          std::to_string(version) + " (expected " +
                                          std::to_string(kDatasetFormatVersion) + ")");
    ds.config = scene_config_from_json(manifest.at("config"));
    count = manifest.at("count").get<int>();
    if (!manifest.at("samples").is_array() || static_cast<int>(manifest.at("samples").size()) != count)
      throw Error(ErrorKind::kFormat, "dataset manifest: samples list does not match count");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, "dataset manifest: " + std::string(e.what()));
  }

  ds.samples.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::string where = "sample " + std::to_string(i);
    const fs::path dir = root / sample_dir(i);
    const Json& files = manifest["samples"][i]["files"];
    auto load = [&](const std::string& name) {
      if (!files.contains(name))
        throw Error(ErrorKind::kFormat, where + ": manifest lacks an entry for " + name);
      std::vector<std::uint8_t> bytes;
      try {
        bytes = read_file(dir / name);
      } catch (const Error& e) {
        throw Error(e.kind(), where + ": " + e.what());
      }
      const auto expected_size = files[name].at("bytes").get<std::size_t>();
      if (bytes.size() < expected_size)
        throw Error(ErrorKind::kFormat, where + ": " + name + " is truncated (" +
                                            std::to_string(bytes.size()) + " of " +
                                            std::to_string(expected_size) + " bytes)");
      if (bytes.size() != expected_size ||
          hex32(crc32_bytes(bytes)) != files[name].at("crc32").get<std::string>())
        throw Error(ErrorKind::kChecksum, where + ": checksum mismatch in " + name);
      return bytes;
    };
    try {
      Sample s;
      const auto scene_bytes = load("scene.json");
      Json scene_json;
      try {
        scene_json = Json::parse(scene_bytes.begin(), scene_bytes.end());
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kFormat, std::string("scene.json: ") + e.what());
      }
      s.scene = scene_from_json(scene_json);
      // Amodal masks and occlusion fractions are recomputed from the exact
      // shape parameters; the stored label maps must agree with them.
      s.rendered = rasterize_scene(s.scene, ds.config, RenderOptions{false, 4});
      s.rendered.image = decode_png_gray8(load("image.png"));
      if (s.rendered.image.width != ds.config.canvas_size || s.rendered.image.height != ds.config.canvas_size)
        throw Error(ErrorKind::kFormat, "image.png has the wrong size");
      LabelMap* maps[4] = {&s.rendered.fg_class, &s.rendered.occ_class, &s.rendered.fg_instance,
                           &s.rendered.occ_instance};
      for (int k = 0; k < 4; ++k) {
        const LabelMap stored = decode_png_gray16(load(kLabelFiles[k]));
        if (stored != *maps[k])
          throw Error(ErrorKind::kFormat, std::string(kLabelFiles[k]) + " disagrees with scene.json");
      }
      ds.samples.push_back(std::move(s));
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (msg.rfind(where, 0) == 0) throw;
      throw Error(e.kind(), where + ": " + msg);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat, where + ": " + e.what());
    }
  }
  return ds;
}

std::string manifest_hash(const fs::path& root) {
  return hex32(crc32_bytes(read_file(root / "manifest.json")));
}

}  // namespace amodal
