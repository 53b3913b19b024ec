#pragma once

#include <cstdint>
#include <vector>

#include "amodal/losscore.hpp"
#include "amodal/net.hpp"
#include "amodal/scenegen.hpp"

namespace amodal {

struct OracleConfig {
  int num_classes = 3;
  int embed_dim = 6;
  double logit_margin = 10.0;
  // Lattice step between instance targets; 2 * d_dst by default.
  double spacing = 3.0;
  // When > 0, every target must lie within this L1 distance of the origin.
  double radius = 0.0;
  // With a radius: shrink the spacing until the class fits instead of failing.
  bool compress = false;
  double sigma = 0.0;
  // Per-coordinate noise std is sigma / embed_dim, so the expected L1 size
  // of the noise does not grow with the dimension.
  bool normalize_noise = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// Number of integer points of Z^dim with L1 norm <= r.
std::uint64_t l1_ball_count(int dim, int r);

// The first `count` integer lattice points ordered by L1 norm, then
// lexicographically, scaled by `spacing`. Distinct targets are at least
// `spacing` apart in L1.
std::vector<Vec> lattice_targets(int count, int dim, double spacing);

// Spacing actually used for `count` targets under `config`. Throws
// Error(kLatticeInfeasible) when a bounded lattice cannot hold them.
double oracle_spacing(int count, const OracleConfig& config);

// Ideal heads from ground truth: one-hot logits scaled by logit_margin and
// per-instance lattice targets (enumerated per class in instance-id order)
// plus Gaussian pixel noise.
HeadOutputs oracle_predict(const Sample& sample, const OracleConfig& config);

// Replaces round(fraction * pixels) randomly chosen labels with a different
// value drawn uniformly from [0, num_labels).
LabelMap corrupt_labels(const LabelMap& labels, double fraction, int num_labels, std::uint64_t seed);

}  // namespace amodal
