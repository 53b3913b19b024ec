#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amodal/grid.hpp"

namespace amodal {

enum class ShapeKind : std::uint8_t { kTriangle, kRectangle, kCircle };

const char* shape_kind_name(ShapeKind kind);
ShapeKind parse_shape_kind(const std::string& name);

struct SceneConfig {
  std::vector<ShapeKind> classes{ShapeKind::kTriangle, ShapeKind::kRectangle,
                                 ShapeKind::kCircle};
  // One entry per class.
  std::vector<int> instances_per_class{6, 6, 6};
  int canvas_size = 256;
  int label_size = 64;
  double shape_scale = 46.0;
  double outline_width = 3.0;
  int min_visible_pixels = 5;
  int max_resample_rounds = 1000;
  std::uint64_t seed = 0;

  int num_classes() const { return static_cast<int>(classes.size()); }
  int total_instances() const;
  double label_stride() const { return static_cast<double>(canvas_size) / label_size; }

  // Throws Error(kInvalidArgument) describing the first violated invariant.
  void validate() const;

  bool operator==(const SceneConfig&) const = default;
};

// Convenience: every class gets the same count.
SceneConfig uniform_scene_config(std::vector<ShapeKind> classes, int per_class,
                                 std::uint64_t seed);

struct ShapeInstance {
  int instance_id = 0;
  int class_id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double orientation = 0.0;
  int depth_rank = 0;  // 0 = topmost

  bool operator==(const ShapeInstance&) const = default;
};

struct Scene {
  std::vector<ShapeInstance> instances;
  std::vector<ShapeKind> classes;
  double shape_scale = 46.0;

  int size() const { return static_cast<int>(instances.size()); }
  // Instance ids ordered from topmost to deepest.
  std::vector<int> depth_order() const;

  bool operator==(const Scene&) const = default;
};

// Analytic shape geometry in input-pixel coordinates.
class ShapeGeometry {
 public:
  ShapeGeometry(ShapeKind kind, double cx, double cy, double orientation, double scale);
  static ShapeGeometry of(const Scene& scene, const ShapeInstance& inst);

  bool contains(double x, double y) const;
  // Negative inside, positive outside, magnitude = Euclidean distance to
  // the boundary.
  double signed_distance(double x, double y) const;
  // Axis-aligned bounds: {xmin, ymin, xmax, ymax}.
  std::array<double, 4> bounds() const;

 private:
  ShapeKind kind_;
  double cx_, cy_, scale_;
  int num_vertices_ = 0;
  std::array<double, 8> vx_{}, vy_{};
};

enum class OcclusionCategory : std::uint8_t { kNone, kPartial, kHeavy };

struct OcclusionThresholds {
  double partial_max = 0.25;

  OcclusionCategory classify(double q) const {
    if (q <= 0.0) return OcclusionCategory::kNone;
    return q <= partial_max ? OcclusionCategory::kPartial : OcclusionCategory::kHeavy;
  }
};

const char* occlusion_category_name(OcclusionCategory c);

struct RenderedSample {
  GrayImage image;  // canvas_size^2; may be empty when rendering is skipped
  LabelMap fg_class;
  LabelMap occ_class;
  LabelMap fg_instance;
  LabelMap occ_instance;
  std::vector<Mask> amodal_masks;  // indexed by instance_id
  std::vector<double> occlusion_fraction;

  int label_size() const { return fg_class.width; }
  bool operator==(const RenderedSample&) const = default;
};

struct RenderOptions {
  bool render_image = true;
  int supersample = 4;  // per axis, for the anti-aliased input image
};

// Deterministic in (config, config.seed). Throws Error(kSceneInfeasible)
// when placements cannot satisfy min_visible_pixels within
// config.max_resample_rounds rounds.
Scene generate_scene(const SceneConfig& config);

RenderedSample rasterize_scene(const Scene& scene, const SceneConfig& config,
                               const RenderOptions& options = {});

// Per-label-pixel cover lists: instance ids sorted topmost-first.
std::vector<std::vector<int>> cover_stacks(const Scene& scene, const SceneConfig& config);

// For each instance, the pixels where it is among the top `layers` covering
// instances. layers >= 1; layers >= N reproduces amodal_masks.
std::vector<Mask> layered_gt_masks(const RenderedSample& rendered, const Scene& scene,
                                   int layers);

// Visible (layer-1) mask of every instance.
std::vector<Mask> visible_masks(const RenderedSample& rendered, int num_instances);

// Per-sample seed used by dataset generation and training streams.
std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index);

struct Sample {
  Scene scene;
  RenderedSample rendered;

  bool operator==(const Sample&) const = default;
};

Sample make_sample(const SceneConfig& config, std::uint64_t index,
                   const RenderOptions& options = {});

}  // namespace amodal
