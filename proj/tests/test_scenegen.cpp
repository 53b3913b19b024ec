#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "amodal/error.hpp"
#include "amodal/rng.hpp"
#include "amodal/scenegen.hpp"
#include "oracles/shapes.hpp"

using namespace amodal;

namespace {

SceneConfig three_class(int per_class, std::uint64_t seed) {
  return uniform_scene_config({ShapeKind::kTriangle, ShapeKind::kRectangle, ShapeKind::kCircle},
                              per_class, seed);
}

Scene manual_scene(std::vector<ShapeKind> classes, double scale, std::vector<ShapeInstance> insts) {
  Scene s;
  s.classes = std::move(classes);
  s.shape_scale = scale;
  s.instances = std::move(insts);
  return s;
}

SceneConfig config_for(const Scene& s, int canvas = 256, int label = 64) {
  SceneConfig c;
  c.classes = s.classes;
  c.instances_per_class.assign(s.classes.size(), 1);
  c.canvas_size = canvas;
  c.label_size = label;
  c.shape_scale = s.shape_scale;
  return c;
}

std::vector<int> visible_counts(const RenderedSample& r, int n) {
  std::vector<int> v(n, 0);
  for (auto l : r.fg_instance.data)
    if (l) ++v[l - 1];
  return v;
}

}  // namespace

TEST(SceneConfig, Validation) {
  auto c = three_class(6, 1);
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.canvas_size = 250;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.instances_per_class = {6, 0, 6};
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.classes.clear();
  bad.instances_per_class.clear();
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.instances_per_class = {6, 6};
  EXPECT_THROW(bad.validate(), Error);
  try {
    bad.validate();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
}

TEST(GenerateScene, EighteenInstancesWithDepthPermutation) {
  const Scene s = generate_scene(three_class(6, 7));
  ASSERT_EQ(s.size(), 18);
  std::vector<int> ranks;
  for (const auto& i : s.instances) ranks.push_back(i.depth_rank);
  std::sort(ranks.begin(), ranks.end());
  std::vector<int> expect(18);
  std::iota(expect.begin(), expect.end(), 0);
  EXPECT_EQ(ranks, expect);
  for (int k = 0; k < 18; ++k) {
    EXPECT_EQ(s.instances[k].instance_id, k);
    EXPECT_EQ(s.instances[k].class_id, k / 6);
    EXPECT_GE(s.instances[k].cx, 0.0);
    EXPECT_LT(s.instances[k].cx, 256.0);
    EXPECT_GE(s.instances[k].cy, 0.0);
    EXPECT_LT(s.instances[k].cy, 256.0);
  }
}

TEST(GenerateScene, Deterministic) {
  const auto c = three_class(6, 7);
  EXPECT_EQ(generate_scene(c), generate_scene(c));
  EXPECT_EQ(make_sample(c, 3), make_sample(c, 3));
  EXPECT_FALSE(generate_scene(c) == generate_scene(three_class(6, 8)));
}

TEST(GenerateScene, ThirtyRectanglesAllVisible) {
  const auto c = uniform_scene_config({ShapeKind::kRectangle}, 30, 11);
  const Scene s = generate_scene(c);
  ASSERT_EQ(s.size(), 30);
  const auto r = rasterize_scene(s, c, {.render_image = false});
  for (int v : visible_counts(r, 30)) EXPECT_GE(v, 5);
}

TEST(GenerateScene, InfeasibleWhenOverPacked) {
  auto c = uniform_scene_config({ShapeKind::kCircle}, 60, 3);
  c.min_visible_pixels = 40;
  c.max_resample_rounds = 5;
  try {
    generate_scene(c);
    FAIL() << "expected scene infeasible";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSceneInfeasible);
  }
}

TEST(Rasterize, SingleCircle) {
  const Scene s = manual_scene({ShapeKind::kCircle}, 40.0, {{0, 0, 100.0, 120.0, 0.0, 0}});
  const auto c = config_for(s);
  const auto r = rasterize_scene(s, c);
  const double stride = c.label_stride();
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      EXPECT_EQ(r.occ_instance(x, y), 0);
      const double px = (x + 0.5) * stride, py = (y + 0.5) * stride;
      const bool in = std::hypot(px - 100.0, py - 120.0) <= 40.0;
      EXPECT_EQ(r.fg_instance(x, y), in ? 1 : 0) << x << "," << y;
      EXPECT_EQ(r.fg_class(x, y), in ? 1 : 0);
    }
  EXPECT_DOUBLE_EQ(r.occlusion_fraction[0], 0.0);
}

TEST(Rasterize, TwoOverlappingRectangles) {
  // A (rank 0) over B (rank 1).
  const Scene s = manual_scene({ShapeKind::kRectangle},
                               40.0, {{0, 0, 110.0, 128.0, 0.3, 0}, {1, 0, 140.0, 128.0, -0.2, 1}});
  const auto c = config_for(s);
  const auto r = rasterize_scene(s, c);
  const double stride = c.label_stride();
  int overlap = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const double px = (x + 0.5) * stride, py = (y + 0.5) * stride;
      if (oracle::near_boundary(s, px, py, 1e-9)) continue;
      const bool a = oracle::inside_margin(s, s.instances[0], px, py) > 0;
      const bool b = oracle::inside_margin(s, s.instances[1], px, py) > 0;
      const int fg = a ? 1 : (b ? 2 : 0);
      const int occ = a && b ? 2 : 0;
      overlap += a && b;
      EXPECT_EQ(r.fg_instance(x, y), fg);
      EXPECT_EQ(r.occ_instance(x, y), occ);
    }
  EXPECT_GT(overlap, 0);
  EXPECT_DOUBLE_EQ(r.occlusion_fraction[0], 0.0);
  EXPECT_GT(r.occlusion_fraction[1], 0.0);
}

TEST(Rasterize, TripleStackKeepsSecondFromTop) {
  // Concentric circles, radii equal; ranks 2, 0, 1.
  const Scene s = manual_scene({ShapeKind::kCircle}, 30.0,
                               {{0, 0, 128.0, 128.0, 0.0, 2}, {1, 0, 132.0, 128.0, 0.0, 0},
                                {2, 0, 124.0, 128.0, 0.0, 1}});
  const auto c = config_for(s);
  const auto r = rasterize_scene(s, c, {.render_image = false});
  const int x = 32, y = 32;  // pixel center (130, 130) lies in all three
  EXPECT_EQ(r.fg_instance(x, y), 2);
  EXPECT_EQ(r.occ_instance(x, y), 3);
  EXPECT_EQ(r.amodal_masks[0](x, y), 1);
  const auto l2 = layered_gt_masks(r, s, 2);
  EXPECT_EQ(l2[0](x, y), 0);
  EXPECT_EQ(l2[1](x, y), 1);
  EXPECT_EQ(l2[2](x, y), 1);
  const auto l3 = layered_gt_masks(r, s, 3);
  EXPECT_EQ(l3[0](x, y), 1);
}

TEST(LayeredMasks, OneLayerIsVisibleAndManyIsAmodal) {
  const auto c = three_class(6, 21);
  const auto smp = make_sample(c, 0, {.render_image = false});
  const auto l1 = layered_gt_masks(smp.rendered, smp.scene, 1);
  const auto vis = visible_masks(smp.rendered, smp.scene.size());
  EXPECT_EQ(l1, vis);
  for (int n = 0; n < smp.scene.size(); ++n)
    for (std::size_t p = 0; p < vis[n].size(); ++p)
      EXPECT_EQ(vis[n][p] != 0, smp.rendered.fg_instance[p] == n + 1);
  EXPECT_EQ(layered_gt_masks(smp.rendered, smp.scene, 18), smp.rendered.amodal_masks);
  EXPECT_EQ(layered_gt_masks(smp.rendered, smp.scene, 100), smp.rendered.amodal_masks);
  const auto l2 = layered_gt_masks(smp.rendered, smp.scene, 2);
  for (int n = 0; n < smp.scene.size(); ++n)
    for (std::size_t p = 0; p < l2[n].size(); ++p)
      EXPECT_EQ(l2[n][p] != 0,
                smp.rendered.fg_instance[p] == n + 1 || smp.rendered.occ_instance[p] == n + 1);
}

TEST(LayeredMasks, NestedInLayers) {
  const auto smp = make_sample(three_class(12, 4), 2, {.render_image = false});
  std::vector<Mask> prev;
  for (int L = 1; L <= 6; ++L) {
    auto cur = layered_gt_masks(smp.rendered, smp.scene, L);
    if (!prev.empty())
      for (std::size_t n = 0; n < cur.size(); ++n)
        for (std::size_t p = 0; p < cur[n].size(); ++p)
          if (prev[n][p]) EXPECT_TRUE(cur[n][p]);
    prev = std::move(cur);
  }
}

class SampleInvariants : public ::testing::TestWithParam<int> {};

TEST_P(SampleInvariants, LabelMapsAgreeWithDepthSortOracle) {
  const int seed = GetParam();
  const auto c = three_class(seed % 2 ? 12 : 6, static_cast<std::uint64_t>(seed));
  const auto smp = make_sample(c, static_cast<std::uint64_t>(seed), {.render_image = false});
  const auto& r = smp.rendered;
  const double stride = c.label_stride();
  int checked = 0;
  for (int y = 0; y < c.label_size; ++y)
    for (int x = 0; x < c.label_size; ++x) {
      const double px = (x + 0.5) * stride, py = (y + 0.5) * stride;
      if (oracle::near_boundary(smp.scene, px, py, 1e-9)) continue;
      const auto stack = oracle::cover(smp.scene, px, py);
      const int fg = stack.size() > 0 ? stack[0] + 1 : 0;
      const int occ = stack.size() > 1 ? stack[1] + 1 : 0;
      ASSERT_EQ(r.fg_instance(x, y), fg) << x << "," << y;
      ASSERT_EQ(r.occ_instance(x, y), occ) << x << "," << y;
      for (int n = 0; n < smp.scene.size(); ++n) {
        const bool in = std::find(stack.begin(), stack.end(), n) != stack.end();
        ASSERT_EQ(r.amodal_masks[n](x, y) != 0, in);
      }
      ++checked;
    }
  EXPECT_GE(checked, 1000);
}

TEST_P(SampleInvariants, StructuralInvariants) {
  const int seed = GetParam();
  const auto c = three_class(seed % 2 ? 12 : 6, static_cast<std::uint64_t>(seed));
  const auto smp = make_sample(c, 0, {.render_image = false});
  const auto& r = smp.rendered;
  const int n = smp.scene.size();
  ASSERT_EQ(static_cast<int>(r.amodal_masks.size()), n);
  for (std::size_t p = 0; p < r.fg_instance.size(); ++p) {
    const int f = r.fg_instance[p], o = r.occ_instance[p];
    ASSERT_LE(f, n);
    ASSERT_LE(o, n);
    if (o) {
      EXPECT_NE(f, 0);
      EXPECT_NE(f, o);
      EXPECT_TRUE(r.amodal_masks[o - 1][p]);
      EXPECT_EQ(r.occ_class[p], smp.scene.instances[o - 1].class_id + 1);
    } else {
      EXPECT_EQ(r.occ_class[p], 0);
    }
    if (f) {
      EXPECT_TRUE(r.amodal_masks[f - 1][p]);
      EXPECT_EQ(r.fg_class[p], smp.scene.instances[f - 1].class_id + 1);
    } else {
      EXPECT_EQ(r.fg_class[p], 0);
    }
  }
  const auto vis = visible_counts(r, n);
  for (int i = 0; i < n; ++i) {
    const auto area = count_nonzero(r.amodal_masks[i]);
    ASSERT_GT(area, 0u);
    EXPECT_GE(vis[i], c.min_visible_pixels);
    const double q = 1.0 - static_cast<double>(vis[i]) / static_cast<double>(area);
    EXPECT_NEAR(r.occlusion_fraction[i], q, 1e-12);
    EXPECT_GE(r.occlusion_fraction[i], 0.0);
    EXPECT_LT(r.occlusion_fraction[i], 1.0);
    EXPECT_EQ(r.occlusion_fraction[i] == 0.0, static_cast<std::size_t>(vis[i]) == area);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, SampleInvariants, ::testing::Range(1, 9));

TEST(Rasterize, ImageHasOutlinesOnlyAndHidesCoveredOutlines) {
  const auto c = three_class(6, 5);
  const auto smp = make_sample(c, 0);
  const auto& img = smp.rendered.image;
  ASSERT_EQ(img.width, 256);
  const double hw = 0.5 * c.outline_width;
  int white_checked = 0, dark_checked = 0;
  Rng rng(99);
  for (int t = 0; t < 20000; ++t) {
    const int x = static_cast<int>(rng.below(256)), y = static_cast<int>(rng.below(256));
    const double px = x + 0.5, py = y + 0.5;
    // Top-down walk: the first instance whose outline band or interior
    // holds the pixel decides.
    std::vector<const ShapeInstance*> order;
    for (const auto& i : smp.scene.instances) order.push_back(&i);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->depth_rank < b->depth_rank; });
    // Polygon margins are not distances, so stay well clear of the band.
    int verdict = 0;  // 0 background, 1 interior, 2 band
    bool ambiguous = false;
    for (auto* i : order) {
      const double m = oracle::inside_margin(smp.scene, *i, px, py);
      if (std::abs(m) < hw + 2.0) {
        if (std::abs(m) < 0.25) verdict = 2;
        else ambiguous = true;
        break;
      }
      if (m > 0) {
        verdict = 1;
        break;
      }
    }
    if (ambiguous) continue;
    if (verdict == 2) {
      EXPECT_LT(img(x, y), 128);
      ++dark_checked;
    } else {
      EXPECT_EQ(img(x, y), 255) << x << "," << y;
      ++white_checked;
    }
  }
  EXPECT_GT(white_checked, 1000);
  EXPECT_GT(dark_checked, 0);
}

TEST(Rasterize, HiddenOutlineIsNotDrawn) {
  // Rectangle on top of a circle, covering the circle's rightmost point.
  auto s = manual_scene({ShapeKind::kRectangle, ShapeKind::kCircle}, 40.0,
                        {{0, 0, 150.0, 128.0, 0.0, 0}, {1, 1, 128.0, 128.0, 0.0, 1}});
  const auto c = config_for(s);
  const auto with = rasterize_scene(s, c);
  // Circle boundary point (168, 128) is 15 pixels inside the rectangle (half sizes 33.3 x 22.2).
  EXPECT_EQ(with.image(168, 128), 255);
  std::swap(s.instances[0].depth_rank, s.instances[1].depth_rank);
  const auto swapped = rasterize_scene(s, c);
  EXPECT_LT(swapped.image(168, 128), 128);
}

TEST(Occlusion, CategoriesPartition) {
  OcclusionThresholds t;
  EXPECT_EQ(t.classify(0.0), OcclusionCategory::kNone);
  EXPECT_EQ(t.classify(1e-9), OcclusionCategory::kPartial);
  EXPECT_EQ(t.classify(0.25), OcclusionCategory::kPartial);
  EXPECT_EQ(t.classify(0.2500001), OcclusionCategory::kHeavy);
  EXPECT_EQ(t.classify(1.0), OcclusionCategory::kHeavy);
}

TEST(Seeds, SampleSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(sample_seed(7, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(Rng, UniformAndBelowInRange) {
  Rng r(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(7), 7u);
  }
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.normal(), b.normal());
}

TEST(ShapeNames, RoundTrip) {
  for (auto k : {ShapeKind::kTriangle, ShapeKind::kRectangle, ShapeKind::kCircle})
    EXPECT_EQ(parse_shape_kind(shape_kind_name(k)), k);
  EXPECT_THROW(parse_shape_kind("hexagon"), Error);
}
