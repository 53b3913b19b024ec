#pragma once

#include <vector>

#include "amodal/grid.hpp"

namespace amodal {

// Margins and weights of the layered discriminative loss.
struct LossConfig {
  double d_var = 0.5;
  double d_dst = 1.5;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double semantic_weight = 1.0;

  void validate() const;
};

enum class Layer { kForeground, kOcclusion };

struct EmbeddingMap {
  Layer layer = Layer::kForeground;
  FeatureMap values;
};

// Pixels are flat indices y * width + x into the label grid.
struct InstanceRegion {
  int instance_id = 0;
  int class_id = 0;
  std::vector<int> fg_pixels;
  std::vector<int> occ_pixels;

  std::size_t size() const { return fg_pixels.size() + occ_pixels.size(); }
};

using InstanceRegions = std::vector<InstanceRegion>;

// Regions from the two layered instance maps (0 = none, v = id v-1).
// Instances absent from both layers are omitted.
InstanceRegions regions_from_labels(const LabelMap& fg_instance, const LabelMap& occ_instance,
                                    const LabelMap& fg_class, const LabelMap& occ_class);

using Vec = std::vector<double>;

struct LossBreakdown {
  double l_var = 0.0;
  double l_dst = 0.0;
  double l_reg = 0.0;
  double l_semantic = 0.0;
  double total = 0.0;
  std::vector<Vec> means;
};

// Mean embedding per region over both layers. Throws Error(kEmptyInstance)
// for a region with no pixels.
std::vector<Vec> instance_means(const FeatureMap& fg, const FeatureMap& occ,
                                const InstanceRegions& regions);

double variance_loss(const FeatureMap& fg, const FeatureMap& occ, const InstanceRegions& regions,
                     const std::vector<Vec>& means, const LossConfig& config);

// `classes[n]` is the class of means[n]; only same-class pairs interact.
double distance_loss(const std::vector<Vec>& means, const std::vector<int>& classes,
                     const LossConfig& config);

double regularization_loss(const std::vector<Vec>& means);

// Mean per-pixel softmax cross-entropy; `labels` hold class indices
// 0..channels-1.
double softmax_cross_entropy(const FeatureMap& logits, const LabelMap& labels,
                             FeatureMap* grad = nullptr);

struct LossInputs {
  const FeatureMap& fg_embed;
  const FeatureMap& occ_embed;
  const FeatureMap& fg_logits;
  const FeatureMap& occ_logits;
  const InstanceRegions& regions;
  const LabelMap& fg_semantic;   // 0 = background, k+1 = class k
  const LabelMap& occ_semantic;  // 0 = none, k+1 = class k
};

LossBreakdown total_loss(const LossInputs& in, const LossConfig& config);

struct LossGradient {
  FeatureMap fg_embed, occ_embed, fg_logits, occ_logits;
};

// Loss and exact subgradients. At a hinge argument of exactly zero, and for
// the L1 norm at a zero coordinate, the zero branch is taken.
LossBreakdown loss_gradient(const LossInputs& in, const LossConfig& config, LossGradient& grad);

}  // namespace amodal
