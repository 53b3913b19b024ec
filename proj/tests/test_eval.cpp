#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "amodal/cluster.hpp"
#include "amodal/error.hpp"
#include "amodal/eval.hpp"
#include "amodal/harness.hpp"
#include "amodal/oracle.hpp"
#include "amodal/rng.hpp"
#include "oracles/eval_bruteforce.hpp"

using namespace amodal;

namespace {

Mask mask_of(int w, int h, std::initializer_list<int> on) {
  Mask m(w, h);
  for (int p : on) m[p] = 1;
  return m;
}

Detection det(int id, int cls, double score, Mask m) { return Detection{id, cls, score, m, m}; }
GroundTruth gt(int cls, Mask m, double q = 0.0) { return GroundTruth{cls, m, m, q}; }

Mask random_mask(Rng& rng, int w, int h, double fill) {
  Mask m(w, h);
  for (auto& v : m.data) v = rng.uniform() < fill;
  if (count_nonzero(m) == 0) m[rng.below(m.size())] = 1;
  return m;
}

// Perfect detections for every GT.
std::vector<SampleEval> perfect(const std::vector<SampleEval>& in) {
  auto out = in;
  for (auto& s : out) {
    s.detections.clear();
    for (std::size_t g = 0; g < s.ground_truth.size(); ++g)
      s.detections.push_back(det(static_cast<int>(g), s.ground_truth[g].class_id, 0.9, s.ground_truth[g].amodal));
  }
  return out;
}

std::vector<SampleEval> random_problem(Rng& rng, int samples, int max_det, int max_gt, int classes,
                                       int w = 3) {
  std::vector<SampleEval> out(samples);
  const double scores[] = {0.2, 0.5, 0.5, 0.9};
  for (auto& s : out) {
    const int ng = static_cast<int>(rng.below(max_gt + 1)), nd = static_cast<int>(rng.below(max_det + 1));
    for (int g = 0; g < ng; ++g) {
      s.ground_truth.push_back(gt(static_cast<int>(rng.below(classes)), random_mask(rng, w, w, 0.5),
                                  rng.uniform() < 0.5 ? 0.0 : rng.uniform()));
    }
    for (int d = 0; d < nd; ++d) {
      Mask m;
      if (ng > 0 && rng.uniform() < 0.6) {
        m = s.ground_truth[rng.below(ng)].amodal;
        for (int flips = static_cast<int>(rng.below(3)); flips > 0; --flips) {
          auto& v = m[rng.below(m.size())];
          v = !v;
        }
      } else {
        m = random_mask(rng, w, w, 0.4);
      }
      s.detections.push_back(det(d, static_cast<int>(rng.below(classes)), scores[rng.below(4)], m));
    }
  }
  return out;
}

EvalConfig small_config(std::vector<double> thresholds) {
  EvalConfig c;
  c.iou_thresholds = std::move(thresholds);
  return c;
}

}  // namespace

TEST(MaskIou, Examples) {
  const auto a = mask_of(3, 3, {0, 1});
  EXPECT_DOUBLE_EQ(mask_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(mask_iou(a, mask_of(3, 3, {5, 6})), 0.0);
  EXPECT_DOUBLE_EQ(mask_iou(a, mask_of(3, 3, {1, 2})), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(mask_iou(Mask(3, 3), Mask(3, 3)), 0.0);
  EXPECT_THROW(mask_iou(a, Mask(2, 3)), Error);
}

TEST(Matching, Examples) {
  // IoU 0.6: 3 of 5 pixels.
  const auto g = mask_of(5, 1, {0, 1, 2, 3});
  const auto d = mask_of(5, 1, {1, 2, 3, 4});
  std::vector<GroundTruth> gts{gt(0, g)};
  std::vector<Detection> one{det(0, 0, 0.5, d)};
  EXPECT_EQ(match_detections(one, gts, {0}, 0.5).detection_to_gt[0], 0);
  EXPECT_EQ(match_detections(one, gts, {0}, 0.65).detection_to_gt[0], -1);

  std::vector<Detection> two{det(0, 0, 0.3, g), det(1, 0, 0.8, d)};
  const auto ranked = rank_detections(two, 100);
  EXPECT_EQ(ranked, (std::vector<int>{1, 0}));
  const auto m = match_detections(two, gts, ranked, 0.5);
  EXPECT_EQ(m.detection_to_gt[1], 0);
  EXPECT_EQ(m.detection_to_gt[0], -1);

  std::vector<Detection> wrong{det(0, 1, 0.9, g)};
  EXPECT_EQ(match_detections(wrong, gts, {0}, 0.5).detection_to_gt[0], -1);
}

TEST(Ranking, TiesByIdAndTruncation) {
  const Mask m(1, 1);
  std::vector<Detection> d{det(5, 0, 0.5, m), det(2, 0, 0.5, m), det(9, 0, 0.7, m)};
  EXPECT_EQ(rank_detections(d, 100), (std::vector<int>{2, 1, 0}));
  EXPECT_EQ(rank_detections(d, 2), (std::vector<int>{2, 1}));
}

TEST(AveragePrecision, PerfectZeroAndAbsent) {
  Rng rng(1);
  auto base = random_problem(rng, 4, 0, 3, 2);
  base[0].ground_truth.push_back(gt(0, random_mask(rng, 3, 3, 0.5)));
  const auto p = perfect(base);
  const EvalConfig cfg;
  const auto ap = average_precision(p, cfg);
  EXPECT_DOUBLE_EQ(*ap.ap, 1.0);
  EXPECT_DOUBLE_EQ(*ap.ap50, 1.0);
  EXPECT_DOUBLE_EQ(*ap.ap75, 1.0);
  EXPECT_DOUBLE_EQ(*average_precision(base, cfg).ap, 0.0);
  std::vector<SampleEval> no_gt{{{det(0, 0, 0.4, Mask(2, 2))}, {}}};
  EXPECT_FALSE(average_precision(no_gt, cfg).ap.has_value());
  EXPECT_FALSE(average_recall(no_gt, cfg).has_value());
}

TEST(AverageRecall, PerfectAndNone) {
  std::vector<SampleEval> s(1);
  s[0].ground_truth = {gt(0, mask_of(3, 3, {0}), 0.0), gt(0, mask_of(3, 3, {1}), 0.1),
                       gt(1, mask_of(3, 3, {2}), 0.6)};
  const auto p = perfect(s);
  const EvalConfig cfg;
  const auto r = evaluate(p, cfg);
  EXPECT_DOUBLE_EQ(*r.ar100, 1.0);
  EXPECT_DOUBLE_EQ(*r.ar_none, 1.0);
  EXPECT_DOUBLE_EQ(*r.ar_partial, 1.0);
  EXPECT_DOUBLE_EQ(*r.ar_heavy, 1.0);
  EXPECT_EQ(r.gt_none, 1);
  EXPECT_EQ(r.gt_partial, 1);
  EXPECT_EQ(r.gt_heavy, 1);
  const auto z = evaluate(s, cfg);
  EXPECT_DOUBLE_EQ(*z.ar100, 0.0);
  EXPECT_DOUBLE_EQ(*z.ar_none, 0.0);
  EXPECT_DOUBLE_EQ(*z.ar_heavy, 0.0);
  EXPECT_DOUBLE_EQ(*z.ap, 0.0);
  std::vector<SampleEval> only_none(1);
  only_none[0].ground_truth = {gt(0, mask_of(3, 3, {0}))};
  EXPECT_FALSE(evaluate(only_none, cfg).ar_heavy.has_value());
}

TEST(AveragePrecision, HandComputedSequence) {
  // One class, 2 GTs; ranked TP, FP, TP: recall 0.5 at precision 1, 1.0 at 2/3.
  std::vector<SampleEval> s(1);
  s[0].ground_truth = {gt(0, mask_of(4, 1, {0})), gt(0, mask_of(4, 1, {1}))};
  s[0].detections = {det(0, 0, 0.9, mask_of(4, 1, {0})), det(1, 0, 0.8, mask_of(4, 1, {3})),
                     det(2, 0, 0.7, mask_of(4, 1, {1}))};
  const auto ap = average_precision(s, small_config({0.5}));
  EXPECT_NEAR(*ap.ap, (51 * 1.0 + 50 * (2.0 / 3.0)) / 101.0, 1e-12);
}

TEST(AveragePrecision, BruteForceOracleAgrees) {
  Rng rng(2024);
  int compared = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto samples = random_problem(rng, 1 + static_cast<int>(rng.below(2)), 3, 3, 2);
    std::vector<double> th = {0.3 + 0.1 * static_cast<double>(rng.below(3))};
    if (rng.uniform() < 0.5) th.push_back(th[0] + 0.25);
    const auto cfg = small_config(th);
    const auto got = evaluate(samples, cfg);
    const auto want = oracle::evaluate(samples, th);
    ASSERT_EQ(got.ap.has_value(), want.ap.has_value()) << trial;
    if (want.ap) {
      ASSERT_NEAR(*got.ap, *want.ap, 1e-9) << trial;
      ASSERT_NEAR(*got.ar100, *want.ar, 1e-9) << trial;
      ++compared;
    }
  }
  EXPECT_GT(compared, 200);
}

TEST(EvalProperties, OrderAndScoreScaleInvariance) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    auto s = random_problem(rng, 3, 5, 4, 2, 4);
    const EvalConfig cfg;
    const auto base = report_to_json(evaluate(s, cfg));
    auto scaled = s;
    for (auto& x : scaled)
      for (auto& d : x.detections) d.score *= 3.5;
    EXPECT_EQ(report_to_json(evaluate(scaled, cfg)), base);
    auto shuffled = s;
    for (auto& x : shuffled) rng.shuffle(x.detections.begin(), x.detections.end());
    EXPECT_EQ(report_to_json(evaluate(shuffled, cfg)), base);
  }
}

TEST(EvalProperties, MonotoneUnderFalsePositiveRemovalAndPerfectAddition) {
  Rng rng(8);
  // Whether a detection is a false positive depends on the threshold.
  const auto cfg = small_config({0.5});
  for (int trial = 0; trial < 60; ++trial) {
    auto s = random_problem(rng, 2, 4, 3, 2, 4);
    const auto base = evaluate(s, cfg);
    if (!base.ap) continue;
    // Drop the unmatched detections.
    auto pruned = s;
    for (auto& x : pruned) {
      const auto m = match_detections(x.detections, x.ground_truth,
                                      rank_detections(x.detections, cfg.max_detections), cfg.iou_thresholds[0]);
      std::vector<Detection> keep;
      for (std::size_t d = 0; d < x.detections.size(); ++d)
        if (m.detection_to_gt[d] >= 0) keep.push_back(x.detections[d]);
      x.detections = keep;
    }
    EXPECT_GE(*evaluate(pruned, cfg).ap, *base.ap - 1e-12);
    // Top-scored perfect detection for the first unmatched GT.
    auto added = s;
    for (auto& x : added) {
      const auto m = match_detections(x.detections, x.ground_truth,
                                      rank_detections(x.detections, cfg.max_detections), cfg.iou_thresholds[0]);
      for (std::size_t g = 0; g < x.ground_truth.size(); ++g)
        if (m.gt_to_detection[g] < 0) {
          x.detections.push_back(det(-1, x.ground_truth[g].class_id, 1.0, x.ground_truth[g].amodal));
          break;
        }
    }
    const auto more = evaluate(added, cfg);
    EXPECT_GE(*more.ap, *base.ap - 1e-12);
    EXPECT_GE(*more.ar100, *base.ar100 - 1e-12);
  }
}

TEST(EvalProperties, BoundsAndSingleCategoryStratification) {
  Rng rng(9);
  const EvalConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    auto s = random_problem(rng, 3, 4, 3, 2, 4);
    for (auto& x : s)
      for (auto& g : x.ground_truth) g.occlusion_fraction = 0.5;
    const auto r = evaluate(s, cfg);
    if (!r.ap) continue;
    EXPECT_LE(*r.ap, *r.ap50 + 1e-12);
    for (auto v : {r.ap, r.ap50, r.ap75, r.ar100, r.ar_heavy}) {
      EXPECT_GE(*v, 0.0);
      EXPECT_LE(*v, 1.0);
    }
    EXPECT_DOUBLE_EQ(*r.ar_heavy, *r.ar100);
    EXPECT_FALSE(r.ar_none.has_value());
  }
}

TEST(EvalProperties, MaxDetectionsCap) {
  std::vector<SampleEval> s(1);
  s[0].ground_truth = {gt(0, mask_of(3, 1, {0})), gt(0, mask_of(3, 1, {1}))};
  s[0].detections = {det(0, 0, 0.9, mask_of(3, 1, {0})), det(1, 0, 0.8, mask_of(3, 1, {1}))};
  auto cfg = small_config({0.5});
  cfg.max_detections = 1;
  EXPECT_DOUBLE_EQ(*evaluate(s, cfg).ar100, 0.5);
}

TEST(EvalConfig, Validation) {
  EXPECT_NO_THROW(EvalConfig{}.validate());
  EXPECT_EQ(EvalConfig::default_iou_thresholds().size(), 10u);
  EXPECT_THROW(small_config({0.6, 0.5}).validate(), Error);
  EXPECT_THROW(small_config({0.0}).validate(), Error);
  EXPECT_THROW(small_config({}).validate(), Error);
}

TEST(OraclePipeline, ZeroNoiseTwoLayerScenesScorePerfect) {
  const auto cfg = uniform_scene_config({ShapeKind::kTriangle, ShapeKind::kRectangle, ShapeKind::kCircle}, 2, 77);
  std::vector<SampleEval> evals;
  for (int i = 0; evals.size() < 20 && i < 400; ++i) {
    const auto s = make_sample(cfg, i, {.render_image = false});
    if (layered_gt_masks(s.rendered, s.scene, 2) != s.rendered.amodal_masks) continue;
    const auto dets = detect_instances(oracle_predict(s, OracleConfig{}), ClusterConfig{});
    evals.push_back({to_detections(dets), ground_truth_from_sample(s)});
  }
  ASSERT_EQ(evals.size(), 20u);
  const auto r = evaluate(evals, EvalConfig{});
  EXPECT_DOUBLE_EQ(*r.ap, 1.0);
  EXPECT_DOUBLE_EQ(*r.ar100, 1.0);
}

TEST(GtLayers, StackDepthLayersGivePerfectScores) {
  const auto cfg = uniform_scene_config({ShapeKind::kTriangle, ShapeKind::kRectangle, ShapeKind::kCircle}, 6, 12);
  std::vector<SampleEval> evals;
  for (int i = 0; i < 10; ++i) evals.push_back(gt_layer_sample_eval(make_sample(cfg, i, {.render_image = false}), 18));
  const auto r = evaluate(evals, EvalConfig{});
  EXPECT_DOUBLE_EQ(*r.ap, 1.0);
  EXPECT_DOUBLE_EQ(*r.ar_none, 1.0);
}

TEST(Reports, JsonCsvAndCurves) {
  std::vector<SampleEval> s(1);
  s[0].ground_truth = {gt(0, mask_of(2, 2, {0}), 0.3)};
  s[0].detections = {det(0, 0, 0.9, mask_of(2, 2, {0}))};
  const auto r = evaluate(s, EvalConfig{}, true);
  const auto j = nlohmann::json::parse(report_to_json(r));
  EXPECT_DOUBLE_EQ(j.at("ap").get<double>(), 1.0);
  EXPECT_TRUE(j.at("ar_none").is_null());
  const auto header = report_csv_header();
  const auto row = report_to_csv_row(r);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_EQ(r.pr_curves.size(), 10u);
  const auto csv = pr_curves_csv(r);
  EXPECT_EQ(csv.rfind("iou_threshold,class_id,recall,precision\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 10 * 101);
}
