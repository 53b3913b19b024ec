#include "amodal/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "amodal/error.hpp"
#include "amodal/rng.hpp"

namespace amodal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = ax + t * dx - px, ey = ay + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

struct PixelBox {
  int x0, y0, x1, y1;  // inclusive-exclusive
};

// Label pixels whose centers could fall inside the shape.
PixelBox label_box(const ShapeGeometry& g, double stride, int size) {
  const auto b = g.bounds();
  auto lo = [&](double v) { return std::clamp(static_cast<int>(std::floor(v / stride - 0.5)), 0, size); };
  auto hi = [&](double v) { return std::clamp(static_cast<int>(std::ceil(v / stride - 0.5)) + 1, 0, size); };
  return {lo(b[0]), lo(b[1]), hi(b[2]), hi(b[3])};
}

std::vector<int> ids_by_depth(const Scene& scene) {
  std::vector<int> order(scene.instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return scene.instances[a].depth_rank < scene.instances[b].depth_rank;
  });
  return order;
}

// Topmost instance per label pixel (-1 where uncovered) via painter's
// algorithm from the top down.
std::vector<int> top_instance(const Scene& scene, const SceneConfig& config) {
  const int size = config.label_size;
  const double stride = config.label_stride();
  std::vector<int> top(static_cast<std::size_t>(size) * size, -1);
  for (int id : ids_by_depth(scene)) {
    const auto g = ShapeGeometry::of(scene, scene.instances[id]);
    const auto box = label_box(g, stride, size);
    for (int y = box.y0; y < box.y1; ++y) {
      for (int x = box.x0; x < box.x1; ++x) {
        auto& t = top[static_cast<std::size_t>(y) * size + x];
        if (t < 0 && g.contains((x + 0.5) * stride, (y + 0.5) * stride)) t = id;
      }
    }
  }
  return top;
}

void place(ShapeInstance& inst, Rng& rng, int canvas) {
  inst.cx = rng.uniform(0.0, canvas);
  inst.cy = rng.uniform(0.0, canvas);
  inst.orientation = rng.uniform(0.0, kTwoPi);
}

}  // namespace

const char* shape_kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kTriangle: return "triangle";
    case ShapeKind::kRectangle: return "rectangle";
    case ShapeKind::kCircle: return "circle";
  }
  return "unknown";
}

ShapeKind parse_shape_kind(const std::string& name) {
  if (name == "triangle") return ShapeKind::kTriangle;
  if (name == "rectangle") return ShapeKind::kRectangle;
  if (name == "circle") return ShapeKind::kCircle;
  throw Error(ErrorKind::kInvalidArgument, "unknown shape kind '" + name + "'");
}

const char* occlusion_category_name(OcclusionCategory c) {
  switch (c) {
    case OcclusionCategory::kNone: return "none";
    case OcclusionCategory::kPartial: return "partial";
    case OcclusionCategory::kHeavy: return "heavy";
  }
  return "unknown";
}

int SceneConfig::total_instances() const {
  return std::accumulate(instances_per_class.begin(), instances_per_class.end(), 0);
}

void SceneConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kInvalidArgument, m); };
  if (classes.empty()) fail("scene config: classes must be nonempty");
  if (instances_per_class.size() != classes.size())
    fail("scene config: instances_per_class must have one entry per class");
  for (int n : instances_per_class)
    if (n < 1) fail("scene config: instances_per_class entries must be >= 1");
  if (canvas_size <= 0 || label_size <= 0) fail("scene config: sizes must be positive");
  if (canvas_size % label_size != 0)
    fail("scene config: canvas_size must be a multiple of label_size");
  if (!(shape_scale > 0.0)) fail("scene config: shape_scale must be positive");
  if (!(outline_width >= 0.0)) fail("scene config: outline_width must be >= 0");
  if (min_visible_pixels < 1) fail("scene config: min_visible_pixels must be >= 1");
  if (max_resample_rounds < 0) fail("scene config: max_resample_rounds must be >= 0");
}

SceneConfig uniform_scene_config(std::vector<ShapeKind> classes, int per_class,
                                 std::uint64_t seed) {
  SceneConfig c;
  c.instances_per_class.assign(classes.size(), per_class);
  c.classes = std::move(classes);
  c.seed = seed;
  return c;
}

std::vector<int> Scene::depth_order() const { return ids_by_depth(*this); }

ShapeGeometry::ShapeGeometry(ShapeKind kind, double cx, double cy, double orientation,
                             double scale)
    : kind_(kind), cx_(cx), cy_(cy), scale_(scale) {
  const double c = std::cos(orientation), s = std::sin(orientation);
  auto put = [&](double lx, double ly) {
    vx_[num_vertices_] = cx + c * lx - s * ly;
    vy_[num_vertices_] = cy + s * lx + c * ly;
    ++num_vertices_;
  };
  switch (kind) {
    case ShapeKind::kTriangle:
      for (int k = 0; k < 3; ++k) {
        const double a = kTwoPi * k / 3.0;
        put(scale * std::cos(a), scale * std::sin(a));
      }
      break;
    case ShapeKind::kRectangle: {
      // 3:2 rectangle inscribed in the circle of radius `scale`.
      const double inv = 1.0 / std::sqrt(13.0);
      const double a = 3.0 * scale * inv, b = 2.0 * scale * inv;
      put(a, b);
      put(-a, b);
      put(-a, -b);
      put(a, -b);
      break;
    }
    case ShapeKind::kCircle:
      break;
  }
}

ShapeGeometry ShapeGeometry::of(const Scene& scene, const ShapeInstance& inst) {
  return ShapeGeometry(scene.classes.at(inst.class_id), inst.cx, inst.cy, inst.orientation,
                       scene.shape_scale);
}

bool ShapeGeometry::contains(double x, double y) const {
  if (kind_ == ShapeKind::kCircle) {
    const double dx = x - cx_, dy = y - cy_;
    return dx * dx + dy * dy <= scale_ * scale_;
  }
  // Vertices are counter-clockwise in (x, y).
  for (int i = 0; i < num_vertices_; ++i) {
    const int j = (i + 1) % num_vertices_;
    const double cross = (vx_[j] - vx_[i]) * (y - vy_[i]) - (vy_[j] - vy_[i]) * (x - vx_[i]);
    if (cross < 0.0) return false;
  }
  return true;
}

double ShapeGeometry::signed_distance(double x, double y) const {
  if (kind_ == ShapeKind::kCircle) {
    return std::hypot(x - cx_, y - cy_) - scale_;
  }
  double d = INFINITY;
  for (int i = 0; i < num_vertices_; ++i) {
    const int j = (i + 1) % num_vertices_;
    d = std::min(d, segment_distance(x, y, vx_[i], vy_[i], vx_[j], vy_[j]));
  }
  return contains(x, y) ? -d : d;
}

std::array<double, 4> ShapeGeometry::bounds() const {
  if (kind_ == ShapeKind::kCircle) {
    return {cx_ - scale_, cy_ - scale_, cx_ + scale_, cy_ + scale_};
  }
  std::array<double, 4> b{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (int i = 0; i < num_vertices_; ++i) {
    b[0] = std::min(b[0], vx_[i]);
    b[1] = std::min(b[1], vy_[i]);
    b[2] = std::max(b[2], vx_[i]);
    b[3] = std::max(b[3], vy_[i]);
  }
  return b;
}

Scene generate_scene(const SceneConfig& config) {
  config.validate();
  Scene scene;
  scene.classes = config.classes;
  scene.shape_scale = config.shape_scale;

  const int n = config.total_instances();
  Rng rng(derive_seed(config.seed, 0));
  std::vector<int> ranks(n);
  std::iota(ranks.begin(), ranks.end(), 0);
  rng.shuffle(ranks.begin(), ranks.end());

  int id = 0;
  for (int k = 0; k < config.num_classes(); ++k) {
    for (int i = 0; i < config.instances_per_class[k]; ++i, ++id) {
      ShapeInstance inst;
      inst.instance_id = id;
      inst.class_id = k;
      inst.depth_rank = ranks[id];
      place(inst, rng, config.canvas_size);
      scene.instances.push_back(inst);
    }
  }

  // Re-place only the instances that are (nearly) hidden; each round draws
  // from its own derived stream so the result depends on (config, seed) only.
  for (int round = 1;; ++round) {
    const auto top = top_instance(scene, config);
    std::vector<int> visible(n, 0);
    for (int t : top)
      if (t >= 0) ++visible[t];
    std::vector<int> offending;
    for (int i = 0; i < n; ++i)
      if (visible[i] < config.min_visible_pixels) offending.push_back(i);
    if (offending.empty()) return scene;
    if (round > config.max_resample_rounds) {
      throw Error(ErrorKind::kSceneInfeasible,
                  "scene infeasible: " + std::to_string(offending.size()) +
                      " instance(s) still below min_visible_pixels after " +
                      std::to_string(config.max_resample_rounds) + " resampling rounds");
    }
    Rng round_rng(derive_seed(config.seed, static_cast<std::uint64_t>(round)));
    for (int i : offending) {
      // A new placement alone cannot rescue an instance buried under many
      // others, so it also trades depth with a random instance.
      auto& inst = scene.instances[i];
      place(inst, round_rng, config.canvas_size);
      auto& other = scene.instances[round_rng.below(static_cast<std::uint64_t>(n))];
      std::swap(inst.depth_rank, other.depth_rank);
    }
  }
}

std::vector<std::vector<int>> cover_stacks(const Scene& scene, const SceneConfig& config) {
  const int size = config.label_size;
  const double stride = config.label_stride();
  std::vector<std::vector<int>> stacks(static_cast<std::size_t>(size) * size);
  for (int id : ids_by_depth(scene)) {
    const auto g = ShapeGeometry::of(scene, scene.instances[id]);
    const auto box = label_box(g, stride, size);
    for (int y = box.y0; y < box.y1; ++y) {
      for (int x = box.x0; x < box.x1; ++x) {
        if (g.contains((x + 0.5) * stride, (y + 0.5) * stride))
          stacks[static_cast<std::size_t>(y) * size + x].push_back(id);
      }
    }
  }
  return stacks;
}

namespace {

GrayImage render_outlines(const Scene& scene, const SceneConfig& config, int supersample) {
  const int size = config.canvas_size;
  const double half_width = 0.5 * config.outline_width;
  GrayImage image(size, size, 255);

  struct Candidate {
    ShapeGeometry geom;
    std::array<double, 4> box;
  };
  std::vector<Candidate> shapes;
  for (int id : ids_by_depth(scene)) {
    auto g = ShapeGeometry::of(scene, scene.instances[id]);
    auto b = g.bounds();
    shapes.push_back({g, {b[0] - half_width - 1, b[1] - half_width - 1, b[2] + half_width + 1,
                          b[3] + half_width + 1}});
  }

  constexpr int kTile = 16;
  const int ss = std::max(1, supersample);
  const double step = 1.0 / ss;
  std::vector<const Candidate*> local;
  for (int ty = 0; ty < size; ty += kTile) {
    for (int tx = 0; tx < size; tx += kTile) {
      local.clear();
      for (const auto& c : shapes) {
        if (c.box[2] < tx || c.box[0] > tx + kTile || c.box[3] < ty || c.box[1] > ty + kTile)
          continue;
        local.push_back(&c);
      }
      if (local.empty()) continue;
      const int y_end = std::min(size, ty + kTile), x_end = std::min(size, tx + kTile);
      for (int y = ty; y < y_end; ++y) {
        for (int x = tx; x < x_end; ++x) {
          int dark = 0;
          for (int sy = 0; sy < ss; ++sy) {
            for (int sx = 0; sx < ss; ++sx) {
              const double px = x + (sx + 0.5) * step, py = y + (sy + 0.5) * step;
              for (const Candidate* c : local) {
                if (px < c->box[0] || px > c->box[2] || py < c->box[1] || py > c->box[3])
                  continue;
                const double sd = c->geom.signed_distance(px, py);
                if (std::abs(sd) <= half_width) {
                  ++dark;
                  break;
                }
                if (sd < 0.0) break;  // opaque interior hides deeper outlines
              }
            }
          }
          const int total = ss * ss;
          image(x, y) = static_cast<std::uint8_t>((255 * (total - dark) + total / 2) / total);
        }
      }
    }
  }
  return image;
}

}  // namespace

RenderedSample rasterize_scene(const Scene& scene, const SceneConfig& config,
                               const RenderOptions& options) {
  config.validate();
  const int size = config.label_size;
  const int n = scene.size();
  RenderedSample out;
  out.fg_class = LabelMap(size, size);
  out.occ_class = LabelMap(size, size);
  out.fg_instance = LabelMap(size, size);
  out.occ_instance = LabelMap(size, size);
  out.amodal_masks.assign(n, Mask(size, size));

  const auto stacks = cover_stacks(scene, config);
  std::vector<int> visible(n, 0), area(n, 0);
  for (std::size_t p = 0; p < stacks.size(); ++p) {
    const auto& s = stacks[p];
    for (int id : s) {
      out.amodal_masks[id][p] = 1;
      ++area[id];
    }
    if (!s.empty()) {
      const auto& top = scene.instances[s[0]];
      out.fg_instance[p] = static_cast<std::uint16_t>(top.instance_id + 1);
      out.fg_class[p] = static_cast<std::uint16_t>(top.class_id + 1);
      ++visible[s[0]];
    }
    if (s.size() >= 2) {
      const auto& second = scene.instances[s[1]];
      out.occ_instance[p] = static_cast<std::uint16_t>(second.instance_id + 1);
      out.occ_class[p] = static_cast<std::uint16_t>(second.class_id + 1);
    }
  }
  out.occlusion_fraction.resize(n);
  for (int i = 0; i < n; ++i) {
    out.occlusion_fraction[i] =
        area[i] > 0 ? 1.0 - static_cast<double>(visible[i]) / area[i] : 1.0;
  }
  if (options.render_image) out.image = render_outlines(scene, config, options.supersample);
  return out;
}

std::vector<Mask> layered_gt_masks(const RenderedSample& rendered, const Scene& scene,
                                   int layers) {
  if (layers < 1) throw Error(ErrorKind::kInvalidArgument, "layered_gt_masks: layers must be >= 1");
  const int n = scene.size();
  const int size = rendered.label_size();
  const auto order = ids_by_depth(scene);
  std::vector<Mask> masks(n, Mask(size, size));
  const std::size_t pixels = static_cast<std::size_t>(size) * size;
  for (std::size_t p = 0; p < pixels; ++p) {
    int taken = 0;
    for (int id : order) {
      if (taken >= layers) break;
      if (rendered.amodal_masks[id][p]) {
        masks[id][p] = 1;
        ++taken;
      }
    }
  }
  return masks;
}

std::vector<Mask> visible_masks(const RenderedSample& rendered, int num_instances) {
  const int size = rendered.label_size();
  std::vector<Mask> masks(num_instances, Mask(size, size));
  for (std::size_t p = 0; p < rendered.fg_instance.size(); ++p) {
    const int v = rendered.fg_instance[p];
    if (v > 0 && v <= num_instances) masks[v - 1][p] = 1;
  }
  return masks;
}

std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index) {
  return derive_seed(base_seed, index);
}

Sample make_sample(const SceneConfig& config, std::uint64_t index, const RenderOptions& options) {
  SceneConfig c = config;
  c.seed = sample_seed(config.seed, index);
  Sample s;
  s.scene = generate_scene(c);
  s.rendered = rasterize_scene(s.scene, c, options);
  return s;
}

}  // namespace amodal
