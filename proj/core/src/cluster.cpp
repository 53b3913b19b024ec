#include "amodal/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "amodal/error.hpp"
#include "amodal/png_io.hpp"
#include "amodal/rle.hpp"
#include "amodal/rng.hpp"
#include "amodal/serialization.hpp"

namespace amodal {

void ClusterConfig::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw Error(ErrorKind::kInvalidArgument, "cluster config: bandwidth must be > 0");
  if (max_iterations < 1)
    throw Error(ErrorKind::kInvalidArgument, "cluster config: max_iterations must be >= 1");
  if (min_cluster_pixels < 1)
    throw Error(ErrorKind::kInvalidArgument, "cluster config: min_cluster_pixels must be >= 1");
}

namespace {

struct Point {
  bool occ;
  int pixel;
  const double* e;
};

double l1(const double* a, const double* b, int c) {
  double s = 0.0;
  for (int i = 0; i < c; ++i) s += std::abs(a[i] - b[i]);
  return s;
}

Vec average(const std::vector<Point>& pts, const std::vector<int>& idx, int c) {
  Vec m(c, 0.0);
  for (int i : idx)
    for (int k = 0; k < c; ++k) m[k] += pts[i].e[k];
  for (auto& v : m) v /= static_cast<double>(idx.size());
  return m;
}

// Mean-shift grouping over `pts`. label[i] = cluster index, or -1 when the
// point ended up in a discarded group.
void group(const std::vector<Point>& pts, int c, const ClusterConfig& cfg, Rng& rng,
           std::vector<int>& label, std::vector<Vec>& means, int& unassigned) {
  std::vector<int> unlabeled(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) unlabeled[i] = static_cast<int>(i);
  std::vector<int> members, next_members;
  while (!unlabeled.empty()) {
    const int seed = unlabeled[rng.below(unlabeled.size())];
    Vec mean(pts[seed].e, pts[seed].e + c);
    members.clear();
    for (int it = 0; it < cfg.max_iterations; ++it) {
      next_members.clear();
      for (int i : unlabeled)
        if (l1(pts[i].e, mean.data(), c) <= cfg.bandwidth) next_members.push_back(i);
      if (next_members.empty()) break;
      members.swap(next_members);
      Vec updated = average(pts, members, c);
      if (updated == mean) break;
      mean = std::move(updated);
    }
    if (members.empty()) {
      members.assign(1, seed);
      mean.assign(pts[seed].e, pts[seed].e + c);
    } else {
      mean = average(pts, members, c);
    }
    const bool keep = static_cast<int>(members.size()) >= cfg.min_cluster_pixels;
    const int id = keep ? static_cast<int>(means.size()) : -1;
    if (keep) means.push_back(mean);
    else unassigned += static_cast<int>(members.size());
    for (int i : members) label[i] = id;
    std::vector<char> taken(pts.size(), 0);
    for (int i : members) taken[i] = 1;
    std::erase_if(unlabeled, [&](int i) { return taken[i] != 0; });
  }
}

}  // namespace

ClusterResult cluster_embeddings(const FeatureMap& fg_embed, const FeatureMap& occ_embed,
                                 const LabelMap& fg_semantic, const LabelMap& occ_semantic,
                                 const ClusterConfig& config) {
  config.validate();
  if (!fg_embed.same_shape(occ_embed) || fg_embed.width != fg_semantic.width ||
      fg_embed.height != fg_semantic.height || !fg_semantic.same_shape(occ_semantic))
    throw Error(ErrorKind::kShapeMismatch, "cluster: embedding and semantic maps differ in shape");
  const int c = fg_embed.channels;
  ClusterResult result;
  result.fg_labels = LabelMap(fg_semantic.width, fg_semantic.height);
  result.occ_labels = LabelMap(fg_semantic.width, fg_semantic.height);

  // Pools of points, one per semantic class or a single shared pool.
  int max_label = 0;
  for (auto v : fg_semantic.data) max_label = std::max<int>(max_label, v);
  for (auto v : occ_semantic.data) max_label = std::max<int>(max_label, v);
  const int pools = config.per_class ? max_label : (max_label > 0 ? 1 : 0);
  auto pool_of = [&](int sem) { return config.per_class ? sem - 1 : 0; };

  Rng rng(config.seed);
  for (int pool = 0; pool < pools; ++pool) {
    std::vector<Point> grouped, attached;
    for (std::size_t p = 0; p < fg_semantic.size(); ++p)
      if (fg_semantic[p] != 0 && pool_of(fg_semantic[p]) == pool)
        grouped.push_back({false, static_cast<int>(p), fg_embed.pixel(p)});
    for (std::size_t p = 0; p < occ_semantic.size(); ++p) {
      if (occ_semantic[p] == 0 || pool_of(occ_semantic[p]) != pool) continue;
      Point pt{true, static_cast<int>(p), occ_embed.pixel(p)};
      (config.foreground_first ? attached : grouped).push_back(pt);
    }
    if (grouped.empty() && attached.empty()) continue;

    const int base = static_cast<int>(result.means.size());
    std::vector<int> label(grouped.size(), -1);
    std::vector<Vec> means;
    group(grouped, c, config, rng, label, means, result.unassigned_pixels);

    std::vector<Point> all = grouped;
    for (const auto& pt : attached) {
      int best = -1;
      double best_d = config.bandwidth;
      for (std::size_t m = 0; m < means.size(); ++m) {
        const double d = l1(pt.e, means[m].data(), c);
        if (d <= best_d && (best < 0 || d < best_d)) {
          best = static_cast<int>(m);
          best_d = d;
        }
      }
      if (best < 0) ++result.unassigned_pixels;
      all.push_back(pt);
      label.push_back(best);
    }
    if (config.foreground_first) {
      // Refresh means with the attached occluded pixels.
      std::vector<std::vector<int>> members(means.size());
      for (std::size_t i = 0; i < all.size(); ++i)
        if (label[i] >= 0) members[label[i]].push_back(static_cast<int>(i));
      for (std::size_t m = 0; m < means.size(); ++m) means[m] = average(all, members[m], c);
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (label[i] < 0) continue;
      auto& map = all[i].occ ? result.occ_labels : result.fg_labels;
      map[all[i].pixel] = static_cast<std::uint16_t>(base + label[i] + 1);
    }
    for (auto& m : means) result.means.push_back(std::move(m));
  }
  return result;
}

std::vector<InstanceDetection> assemble_detections(const ClusterResult& clusters,
                                                   const FeatureMap& fg_embed,
                                                   const FeatureMap& occ_embed,
                                                   const LabelMap& fg_semantic,
                                                   const LabelMap& occ_semantic,
                                                   const ClusterConfig& config) {
  const int n = clusters.num_clusters();
  const int w = clusters.fg_labels.width, h = clusters.fg_labels.height;
  const int c = fg_embed.channels;
  std::vector<InstanceDetection> out(n);
  std::vector<std::map<int, int>> votes(n);
  std::vector<double> score_sum(n, 0.0);
  std::vector<int> count(n, 0);
  for (int i = 0; i < n; ++i) {
    out[i].instance_id = i;
    out[i].fg_mask = Mask(w, h);
    out[i].occ_mask = Mask(w, h);
    out[i].amodal_mask = Mask(w, h);
  }
  auto visit = [&](const LabelMap& labels, const LabelMap& sem, const FeatureMap& embed, bool occ) {
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const int l = labels[p];
      if (l == 0) continue;
      const int k = l - 1;
      (occ ? out[k].occ_mask : out[k].fg_mask)[p] = 1;
      out[k].amodal_mask[p] = 1;
      if (sem[p] != 0) ++votes[k][sem[p] - 1];
      const double d = l1(embed.pixel(p), clusters.means[k].data(), c);
      score_sum[k] += std::max(0.0, 1.0 - d / config.bandwidth);
      ++count[k];
    }
  };
  visit(clusters.fg_labels, fg_semantic, fg_embed, false);
  visit(clusters.occ_labels, occ_semantic, occ_embed, true);
  for (int i = 0; i < n; ++i) {
    int best = 0, best_votes = -1;
    for (const auto& [cls, v] : votes[i])  // ascending class order; strict > keeps the lower
      if (v > best_votes) {
        best = cls;
        best_votes = v;
      }
    out[i].class_id = best;
    out[i].score = count[i] > 0 ? score_sum[i] / count[i] : 0.0;
  }
  std::erase_if(out, [](const InstanceDetection& d) { return count_nonzero(d.amodal_mask) == 0; });
  return out;
}

Detection to_detection(const InstanceDetection& d) {
  return Detection{d.instance_id, d.class_id, d.score, d.amodal_mask, d.fg_mask};
}

std::vector<Detection> to_detections(const std::vector<InstanceDetection>& ds) {
  std::vector<Detection> out;
  out.reserve(ds.size());
  for (const auto& d : ds) out.push_back(to_detection(d));
  return out;
}

namespace {

std::vector<std::uint8_t> colorize(const LabelMap& labels) {
  std::vector<std::uint8_t> rgb(labels.size() * 3, 255);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] == 0) continue;
    const std::uint64_t hsh = splitmix64(labels[p]);
    for (int ch = 0; ch < 3; ++ch) rgb[3 * p + ch] = static_cast<std::uint8_t>(40 + (hsh >> (8 * ch)) % 180);
  }
  return rgb;
}

}  // namespace

void write_cluster_debug(const std::filesystem::path& dir, const ClusterResult& clusters,
                         const std::vector<InstanceDetection>& detections) {
  std::filesystem::create_directories(dir);
  const int w = clusters.fg_labels.width, h = clusters.fg_labels.height;
  write_file(dir / "fg_labels.png", encode_png_rgb8(w, h, colorize(clusters.fg_labels)));
  write_file(dir / "occ_labels.png", encode_png_rgb8(w, h, colorize(clusters.occ_labels)));
  nlohmann::json j = nlohmann::json::array();
  for (const auto& d : detections)
    j.push_back({{"instance_id", d.instance_id},
                 {"class_id", d.class_id},
                 {"score", d.score},
                 {"fg_mask", to_json(encode_rle(d.fg_mask))},
                 {"occ_mask", to_json(encode_rle(d.occ_mask))}});
  write_file(dir / "detections.json", j.dump(2) + "\n");
}

}  // namespace amodal
