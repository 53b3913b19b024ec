#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "amodal/eval.hpp"
#include "amodal/grid.hpp"
#include "amodal/losscore.hpp"

namespace amodal {

struct ClusterConfig {
  double bandwidth = 1.5;  // L1 grouping radius
  int max_iterations = 100;
  int min_cluster_pixels = 3;
  std::uint64_t seed = 0;
  // Cluster each semantic class separately. Pooled mode groups all gated
  // pixels in one space and relies on the class vote afterwards.
  bool per_class = true;
  // Group foreground pixels only, then attach each occluded pixel to the
  // nearest cluster mean within bandwidth.
  bool foreground_first = false;

  void validate() const;
};

// Label maps use 0 for "not clustered" and v > 0 for cluster v-1.
struct ClusterResult {
  LabelMap fg_labels;
  LabelMap occ_labels;
  std::vector<Vec> means;
  int unassigned_pixels = 0;  // gated pixels left out by min_cluster_pixels

  int num_clusters() const { return static_cast<int>(means.size()); }
};

// Semantic maps: 0 = none, k+1 = class k. Only pixels with a nonzero
// semantic label take part.
ClusterResult cluster_embeddings(const FeatureMap& fg_embed, const FeatureMap& occ_embed,
                                 const LabelMap& fg_semantic, const LabelMap& occ_semantic,
                                 const ClusterConfig& config);

struct InstanceDetection {
  int instance_id = 0;
  int class_id = 0;
  Mask fg_mask;
  Mask occ_mask;
  Mask amodal_mask;
  double score = 0.0;
};

std::vector<InstanceDetection> assemble_detections(const ClusterResult& clusters,
                                                   const FeatureMap& fg_embed,
                                                   const FeatureMap& occ_embed,
                                                   const LabelMap& fg_semantic,
                                                   const LabelMap& occ_semantic,
                                                   const ClusterConfig& config);

// The visible mask of a detection is its foreground-layer mask.
Detection to_detection(const InstanceDetection& d);
std::vector<Detection> to_detections(const std::vector<InstanceDetection>& ds);

// Writes fg_labels.png / occ_labels.png (colorized) and detections.json
// into `dir`.
void write_cluster_debug(const std::filesystem::path& dir, const ClusterResult& clusters,
                         const std::vector<InstanceDetection>& detections);

}  // namespace amodal
