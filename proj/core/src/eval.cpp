#include "amodal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amodal/error.hpp"

namespace amodal {

namespace {

using IouMatrix = std::vector<std::vector<double>>;  // [detection][gt]

IouMatrix iou_matrix(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                     bool visible) {
  IouMatrix m(dets.size(), std::vector<double>(gts.size(), 0.0));
  for (std::size_t d = 0; d < dets.size(); ++d) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (dets[d].class_id != gts[g].class_id) continue;
      m[d][g] = visible ? mask_iou(dets[d].visible, gts[g].visible)
                        : mask_iou(dets[d].amodal, gts[g].amodal);
    }
  }
  return m;
}

Matching greedy_match(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                      const IouMatrix& ious, const std::vector<int>& ranked, double threshold) {
  Matching m;
  m.detection_to_gt.assign(dets.size(), -1);
  m.gt_to_detection.assign(gts.size(), -1);
  for (int d : ranked) {
    int best = -1;
    double best_iou = threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (m.gt_to_detection[g] >= 0 || dets[d].class_id != gts[g].class_id) continue;
      const double iou = ious[d][g];
      if (iou >= best_iou && (best < 0 || iou > best_iou)) {
        best = static_cast<int>(g);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      m.detection_to_gt[d] = best;
      m.gt_to_detection[best] = d;
    }
  }
  return m;
}

struct MatchedSample {
  std::vector<int> ranked;
  std::vector<Matching> per_threshold;
};

std::vector<MatchedSample> match_all(const std::vector<SampleEval>& samples,
                                     const EvalConfig& config) {
  std::vector<MatchedSample> out(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& se = samples[s];
    out[s].ranked = rank_detections(se.detections, config.max_detections);
    const auto ious = iou_matrix(se.detections, se.ground_truth, config.visible_iou);
    for (double t : config.iou_thresholds)
      out[s].per_threshold.push_back(
          greedy_match(se.detections, se.ground_truth, ious, out[s].ranked, t));
  }
  return out;
}

std::vector<int> class_ids(const std::vector<SampleEval>& samples) {
  std::vector<int> ids;
  for (const auto& s : samples) {
    for (const auto& g : s.ground_truth) ids.push_back(g.class_id);
    for (const auto& d : s.detections) ids.push_back(d.class_id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::optional<std::size_t> threshold_index(const EvalConfig& c, double t) {
  for (std::size_t i = 0; i < c.iou_thresholds.size(); ++i)
    if (std::abs(c.iou_thresholds[i] - t) < 1e-9) return i;
  return std::nullopt;
}

// Precision interpolated on the recall grid for one class at one threshold.
std::vector<double> interpolated_precision(const std::vector<SampleEval>& samples,
                                           const std::vector<MatchedSample>& matched,
                                           std::size_t ti, int class_id, int num_gt,
                                           int recall_points, std::vector<double>* grid_out) {
  struct Entry {
    double score;
    std::size_t sample;
    std::size_t rank;
    bool tp;
  };
  std::vector<Entry> entries;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& ranked = matched[s].ranked;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      const auto& det = samples[s].detections[ranked[r]];
      if (det.class_id != class_id) continue;
      entries.push_back({det.score, s, r, matched[s].per_threshold[ti].detection_to_gt[ranked[r]] >= 0});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    // Within a block of equal scores the order carries no information;
    // true positives are swept first.
    if (a.tp != b.tp) return a.tp;
    if (a.sample != b.sample) return a.sample < b.sample;
    return a.rank < b.rank;
  });

  std::vector<double> rc(entries.size()), pr(entries.size());
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    (entries[i].tp ? tp : fp) += 1.0;
    rc[i] = tp / num_gt;
    pr[i] = tp / (tp + fp);
  }
  for (std::size_t i = pr.size(); i-- > 1;) pr[i - 1] = std::max(pr[i - 1], pr[i]);

  std::vector<double> q(recall_points, 0.0);
  for (int r = 0; r < recall_points; ++r) {
    const double level = recall_points > 1 ? static_cast<double>(r) / (recall_points - 1) : 0.0;
    if (grid_out) grid_out->push_back(level);
    // Guard the recall grid against rounding in tp / num_gt.
    auto it = std::lower_bound(rc.begin(), rc.end(), level - 1e-12);
    if (it != rc.end()) q[r] = pr[static_cast<std::size_t>(it - rc.begin())];
  }
  return q;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::optional<double> recall_impl(const std::vector<SampleEval>& samples,
                                  const std::vector<MatchedSample>& matched,
                                  const EvalConfig& config,
                                  std::optional<OcclusionCategory> category,
                                  std::optional<int> only_class) {
  std::vector<double> values;
  for (int k : class_ids(samples)) {
    if (only_class && *only_class != k) continue;
    for (std::size_t ti = 0; ti < config.iou_thresholds.size(); ++ti) {
      int total = 0, hit = 0;
      for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& gts = samples[s].ground_truth;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          if (gts[g].class_id != k) continue;
          if (category && config.occlusion.classify(gts[g].occlusion_fraction) != *category)
            continue;
          ++total;
          hit += matched[s].per_threshold[ti].gt_to_detection[g] >= 0;
        }
      }
      if (total > 0) values.push_back(static_cast<double>(hit) / total);
    }
  }
  if (values.empty()) return std::nullopt;
  return mean(values);
}

ApResult ap_impl(const std::vector<SampleEval>& samples, const std::vector<MatchedSample>& matched,
                 const EvalConfig& config, std::vector<PrCurve>* curves) {
  ApResult out;
  const auto i50 = threshold_index(config, 0.5), i75 = threshold_index(config, 0.75);
  std::vector<double> ap_k, ap50_k, ap75_k;
  for (int k : class_ids(samples)) {
    int num_gt = 0;
    for (const auto& s : samples)
      for (const auto& g : s.ground_truth) num_gt += g.class_id == k;
    ClassMetrics cm;
    cm.class_id = k;
    cm.num_gt = num_gt;
    if (num_gt == 0) {
      out.per_class.push_back(cm);
      continue;
    }
    std::vector<double> per_t;
    for (std::size_t ti = 0; ti < config.iou_thresholds.size(); ++ti) {
      std::vector<double> grid;
      auto q = interpolated_precision(samples, matched, ti, k, num_gt, config.recall_points,
                                      curves ? &grid : nullptr);
      per_t.push_back(mean(q));
      if (curves) curves->push_back({config.iou_thresholds[ti], k, std::move(grid), std::move(q)});
    }
    cm.ap = mean(per_t);
    cm.ar = recall_impl(samples, matched, config, std::nullopt, k);
    ap_k.push_back(*cm.ap);
    if (i50) ap50_k.push_back(per_t[*i50]);
    if (i75) ap75_k.push_back(per_t[*i75]);
    out.per_class.push_back(cm);
  }
  if (!ap_k.empty()) out.ap = mean(ap_k);
  if (!ap50_k.empty()) out.ap50 = mean(ap50_k);
  if (!ap75_k.empty()) out.ap75 = mean(ap75_k);
  return out;
}

}  // namespace

std::vector<double> EvalConfig::default_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty())
    throw Error(ErrorKind::kInvalidArgument, "eval config: iou_thresholds must be nonempty");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0) || (i > 0 && t <= iou_thresholds[i - 1]))
      throw Error(ErrorKind::kInvalidArgument,
                  "eval config: iou_thresholds must be strictly increasing in (0, 1]");
  }
  if (max_detections < 1 || recall_points < 1)
    throw Error(ErrorKind::kInvalidArgument, "eval config: max_detections and recall_points must be >= 1");
}

double mask_iou(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::kShapeMismatch, "mask_iou: dimension mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<int> rank_detections(const std::vector<Detection>& detections, int max_det) {
  std::vector<int> idx(detections.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const auto& da = detections[a];
    const auto& db = detections[b];
    if (da.score != db.score) return da.score > db.score;
    if (da.id != db.id) return da.id < db.id;
    return a < b;
  });
  if (static_cast<int>(idx.size()) > max_det) idx.resize(max_det);
  return idx;
}

Matching match_detections(const std::vector<Detection>& detections,
                          const std::vector<GroundTruth>& gts, const std::vector<int>& ranked,
                          double iou_threshold, bool visible_iou) {
  return greedy_match(detections, gts, iou_matrix(detections, gts, visible_iou), ranked,
                      iou_threshold);
}

ApResult average_precision(const std::vector<SampleEval>& samples, const EvalConfig& config,
                           std::vector<PrCurve>* curves) {
  config.validate();
  return ap_impl(samples, match_all(samples, config), config, curves);
}

std::optional<double> average_recall(const std::vector<SampleEval>& samples,
                                     const EvalConfig& config,
                                     std::optional<OcclusionCategory> category) {
  config.validate();
  return recall_impl(samples, match_all(samples, config), config, category, std::nullopt);
}

EvalReport evaluate(const std::vector<SampleEval>& samples, const EvalConfig& config,
                    bool keep_pr_curves) {
  config.validate();
  const auto matched = match_all(samples, config);
  EvalReport r;
  auto ap = ap_impl(samples, matched, config, keep_pr_curves ? &r.pr_curves : nullptr);
  r.ap = ap.ap;
  r.ap50 = ap.ap50;
  r.ap75 = ap.ap75;
  r.per_class = std::move(ap.per_class);
  r.ar100 = recall_impl(samples, matched, config, std::nullopt, std::nullopt);
  r.ar_none = recall_impl(samples, matched, config, OcclusionCategory::kNone, std::nullopt);
  r.ar_partial = recall_impl(samples, matched, config, OcclusionCategory::kPartial, std::nullopt);
  r.ar_heavy = recall_impl(samples, matched, config, OcclusionCategory::kHeavy, std::nullopt);
  r.num_samples = static_cast<int>(samples.size());
  for (const auto& s : samples) {
    r.num_detections += static_cast<int>(s.detections.size());
    for (const auto& g : s.ground_truth) {
      switch (config.occlusion.classify(g.occlusion_fraction)) {
        case OcclusionCategory::kNone: ++r.gt_none; break;
        case OcclusionCategory::kPartial: ++r.gt_partial; break;
        case OcclusionCategory::kHeavy: ++r.gt_heavy; break;
      }
    }
  }
  return r;
}

std::vector<GroundTruth> ground_truth_from_sample(const Sample& sample) {
  const int n = sample.scene.size();
  const auto visible = visible_masks(sample.rendered, n);
  std::vector<GroundTruth> gts(n);
  for (int i = 0; i < n; ++i) {
    gts[i].class_id = sample.scene.instances[i].class_id;
    gts[i].amodal = sample.rendered.amodal_masks[i];
    gts[i].visible = visible[i];
    gts[i].occlusion_fraction = sample.rendered.occlusion_fraction[i];
  }
  return gts;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::kShapeMismatch, "adjusted_rand_index: labelings differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(n);
  const double max_index = 0.5 * (sa + sb);
  // Both labelings trivial (all one cluster or all singletons) and equal.
  if (max_index == expected) return a == b || index == max_index ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "NA";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << *v;
  return os.str();
}

}  // namespace

std::string report_to_json(const EvalReport& r, int indent) {
  nlohmann::json j;
  j["ap"] = opt(r.ap);
  j["ap50"] = opt(r.ap50);
  j["ap75"] = opt(r.ap75);
  j["ar100"] = opt(r.ar100);
  j["ar_none"] = opt(r.ar_none);
  j["ar_partial"] = opt(r.ar_partial);
  j["ar_heavy"] = opt(r.ar_heavy);
  j["counts"] = {{"samples", r.num_samples},
                 {"detections", r.num_detections},
                 {"gt_none", r.gt_none},
                 {"gt_partial", r.gt_partial},
                 {"gt_heavy", r.gt_heavy}};
  auto& pc = j["per_class"] = nlohmann::json::array();
  for (const auto& c : r.per_class)
    pc.push_back({{"class_id", c.class_id}, {"num_gt", c.num_gt}, {"ap", opt(c.ap)}, {"ar", opt(c.ar)}});
  return j.dump(indent);
}

std::string report_csv_header() {
  return "ap,ap50,ap75,ar100,ar_none,ar_partial,ar_heavy,gt_none,gt_partial,gt_heavy";
}

std::string report_to_csv_row(const EvalReport& r) {
  std::ostringstream os;
  os << fmt_opt(r.ap) << ',' << fmt_opt(r.ap50) << ',' << fmt_opt(r.ap75) << ','
     << fmt_opt(r.ar100) << ',' << fmt_opt(r.ar_none) << ',' << fmt_opt(r.ar_partial) << ','
     << fmt_opt(r.ar_heavy) << ',' << r.gt_none << ',' << r.gt_partial << ',' << r.gt_heavy;
  return os.str();
}

std::string pr_curves_csv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(9);
  os << "iou_threshold,class_id,recall,precision\n";
  for (const auto& c : r.pr_curves)
    for (std::size_t i = 0; i < c.recall.size(); ++i)
      os << c.iou_threshold << ',' << c.class_id << ',' << c.recall[i] << ',' << c.precision[i] << '\n';
  return os.str();
}

}  // namespace amodal
