#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amodal/grid.hpp"
#include "amodal/scenegen.hpp"

namespace amodal {

struct EvalConfig {
  std::vector<double> iou_thresholds = default_iou_thresholds();
  int max_detections = 100;
  int recall_points = 101;
  OcclusionThresholds occlusion;
  // Diagnostics only: match on visible masks instead of amodal masks.
  bool visible_iou = false;

  static std::vector<double> default_iou_thresholds();
  void validate() const;
};

struct Detection {
  int id = 0;  // tie-break key among equal scores (ascending)
  int class_id = 0;
  double score = 0.0;
  Mask amodal;
  Mask visible;  // optional; only read when EvalConfig::visible_iou
};

struct GroundTruth {
  int class_id = 0;
  Mask amodal;
  Mask visible;
  double occlusion_fraction = 0.0;
};

struct SampleEval {
  std::vector<Detection> detections;
  std::vector<GroundTruth> ground_truth;
};

double mask_iou(const Mask& a, const Mask& b);

// Index of the matched ground truth per detection (-1 = false positive),
// in the order of `order` (detection indices sorted by rank).
struct Matching {
  std::vector<int> detection_to_gt;
  std::vector<int> gt_to_detection;
};

// Greedy class-aware matching. `ranked` lists detection indices in rank
// order; only those are considered.
Matching match_detections(const std::vector<Detection>& detections,
                          const std::vector<GroundTruth>& gts,
                          const std::vector<int>& ranked, double iou_threshold,
                          bool visible_iou = false);

// Detection indices sorted by (score desc, id asc), truncated to max_det.
std::vector<int> rank_detections(const std::vector<Detection>& detections, int max_det);

struct ClassMetrics {
  int class_id = 0;
  int num_gt = 0;
  std::optional<double> ap;
  std::optional<double> ar;
};

struct PrCurve {
  double iou_threshold = 0.0;
  int class_id = 0;
  std::vector<double> recall;
  std::vector<double> precision;  // interpolated, on the recall grid
};

struct EvalReport {
  std::optional<double> ap, ap50, ap75, ar100;
  std::optional<double> ar_none, ar_partial, ar_heavy;
  std::vector<ClassMetrics> per_class;
  int gt_none = 0, gt_partial = 0, gt_heavy = 0;
  int num_samples = 0, num_detections = 0;
  std::vector<PrCurve> pr_curves;
};

struct ApResult {
  std::optional<double> ap, ap50, ap75;
  std::vector<ClassMetrics> per_class;
};

ApResult average_precision(const std::vector<SampleEval>& samples, const EvalConfig& config,
                           std::vector<PrCurve>* curves = nullptr);

// Mean over IoU thresholds (and classes) of recall using up to
// max_detections per sample; `category` restricts the GT set only.
std::optional<double> average_recall(const std::vector<SampleEval>& samples,
                                     const EvalConfig& config,
                                     std::optional<OcclusionCategory> category = std::nullopt);

EvalReport evaluate(const std::vector<SampleEval>& samples, const EvalConfig& config,
                    bool keep_pr_curves = false);

// Ground truth for a rendered sample: amodal masks and classes per instance.
std::vector<GroundTruth> ground_truth_from_sample(const Sample& sample);

// Adjusted Rand index of two labelings over the same points.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

std::string report_to_json(const EvalReport& report, int indent = 2);
std::string report_to_csv_row(const EvalReport& report);
std::string report_csv_header();
// One row per (iou_threshold, class_id, recall, precision) grid point.
std::string pr_curves_csv(const EvalReport& report);

}  // namespace amodal
