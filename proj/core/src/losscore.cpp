#include "amodal/losscore.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "amodal/error.hpp"

namespace amodal {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double hinge(double a) { return a > 0.0 ? a : 0.0; }

double l1_distance(const double* a, const double* b, int c) {
  double d = 0.0;
  for (int i = 0; i < c; ++i) d += std::abs(a[i] - b[i]);
  return d;
}

void check_inputs(const LossInputs& in) {
  const auto& f = in.fg_embed;
  if (!f.same_shape(in.occ_embed))
    throw Error(ErrorKind::kShapeMismatch, "loss: foreground and occlusion embeddings differ in shape");
  if (f.channels < 1) throw Error(ErrorKind::kShapeMismatch, "loss: embeddings need C >= 1");
  auto check_logits = [&](const FeatureMap& l, const LabelMap& labels, const char* name) {
    if (l.width != f.width || l.height != f.height || labels.width != f.width ||
        labels.height != f.height)
      throw Error(ErrorKind::kShapeMismatch, std::string("loss: ") + name + " has wrong spatial size");
  };
  check_logits(in.fg_logits, in.fg_semantic, "foreground semantics");
  check_logits(in.occ_logits, in.occ_semantic, "occlusion semantics");
  const int pixels = static_cast<int>(f.pixels());
  for (const auto& r : in.regions) {
    for (int p : r.fg_pixels)
      if (p < 0 || p >= pixels) throw Error(ErrorKind::kShapeMismatch, "loss: region pixel out of range");
    for (int p : r.occ_pixels)
      if (p < 0 || p >= pixels) throw Error(ErrorKind::kShapeMismatch, "loss: region pixel out of range");
  }
}

// Shared path for the value and, when `grad` is set, the gradient.
LossBreakdown compute(const LossInputs& in, const LossConfig& cfg, LossGradient* grad) {
  cfg.validate();
  check_inputs(in);
  const auto& fg = in.fg_embed;
  const auto& occ = in.occ_embed;
  const int c = fg.channels;
  const auto& regions = in.regions;
  const std::size_t n = regions.size();

  LossBreakdown out;
  out.means = instance_means(fg, occ, regions);
  std::vector<int> classes(n);
  for (std::size_t i = 0; i < n; ++i) classes[i] = regions[i].class_id;

  out.l_var = variance_loss(fg, occ, regions, out.means, cfg);
  out.l_dst = distance_loss(out.means, classes, cfg);
  out.l_reg = regularization_loss(out.means);

  FeatureMap* g_fg_logits = nullptr;
  FeatureMap* g_occ_logits = nullptr;
  if (grad) {
    grad->fg_embed = FeatureMap(fg.width, fg.height, c);
    grad->occ_embed = FeatureMap(fg.width, fg.height, c);
    g_fg_logits = &grad->fg_logits;
    g_occ_logits = &grad->occ_logits;
  }

  const double ce_fg = softmax_cross_entropy(in.fg_logits, in.fg_semantic, g_fg_logits);
  const double ce_occ = softmax_cross_entropy(in.occ_logits, in.occ_semantic, g_occ_logits);
  out.l_semantic = ce_fg + ce_occ;
  out.total = cfg.alpha * out.l_var + cfg.beta * out.l_dst + cfg.gamma * out.l_reg +
              cfg.semantic_weight * out.l_semantic;

  if (!grad) return out;

  for (auto* g : {g_fg_logits, g_occ_logits})
    for (auto& v : g->values) v *= cfg.semantic_weight;
  if (n == 0) return out;

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<Vec> g_mu(n, Vec(c, 0.0));

  // Variance term: direct pixel path plus the path through the mean.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = regions[i];
    const double* mu = out.means[i].data();
    const double coeff = cfg.alpha * inv_n * 2.0 / static_cast<double>(r.size());
    auto visit = [&](const FeatureMap& map, FeatureMap& gmap, int p) {
      const double* e = map.pixel(p);
      const double h = hinge(l1_distance(mu, e, c) - cfg.d_var);
      if (h == 0.0) return;
      double* ge = gmap.pixel(p);
      for (int k = 0; k < c; ++k) {
        const double s = coeff * h * sign(mu[k] - e[k]);
        ge[k] -= s;
        g_mu[i][k] += s;
      }
    };
    for (int p : r.fg_pixels) visit(fg, grad->fg_embed, p);
    for (int p : r.occ_pixels) visit(occ, grad->occ_embed, p);
  }

  // Distance term over ordered same-class pairs.
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[classes[i]].push_back(i);
  for (const auto& [k, members] : by_class) {
    const double nk = static_cast<double>(members.size());
    if (members.size() < 2) continue;
    const double factor = cfg.beta / (nk * (nk - 1.0));
    for (std::size_t a : members) {
      for (std::size_t b : members) {
        if (a == b) continue;
        const double* ma = out.means[a].data();
        const double* mb = out.means[b].data();
        const double h = hinge(2.0 * cfg.d_dst - l1_distance(ma, mb, c));
        if (h == 0.0) continue;
        for (int j = 0; j < c; ++j) {
          const double s = factor * 2.0 * h * sign(ma[j] - mb[j]);
          g_mu[a][j] -= s;
          g_mu[b][j] += s;
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < c; ++k) g_mu[i][k] += cfg.gamma * inv_n * sign(out.means[i][k]);

  // Each mean is the average over its pixels in both layers.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = regions[i];
    const double w = 1.0 / static_cast<double>(r.size());
    for (int p : r.fg_pixels) {
      double* ge = grad->fg_embed.pixel(p);
      for (int k = 0; k < c; ++k) ge[k] += w * g_mu[i][k];
    }
    for (int p : r.occ_pixels) {
      double* ge = grad->occ_embed.pixel(p);
      for (int k = 0; k < c; ++k) ge[k] += w * g_mu[i][k];
    }
  }
  return out;
}

}  // namespace

void LossConfig::validate() const {
  if (!(d_var > 0.0)) throw Error(ErrorKind::kInvalidArgument, "loss config: d_var must be > 0");
  if (!(d_dst > d_var)) throw Error(ErrorKind::kInvalidArgument, "loss config: d_dst must exceed d_var");
  if (alpha < 0 || beta < 0 || gamma < 0 || semantic_weight < 0)
    throw Error(ErrorKind::kInvalidArgument, "loss config: weights must be >= 0");
}

InstanceRegions regions_from_labels(const LabelMap& fg_instance, const LabelMap& occ_instance,
                                    const LabelMap& fg_class, const LabelMap& occ_class) {
  if (!fg_instance.same_shape(occ_instance) || !fg_instance.same_shape(fg_class) ||
      !fg_instance.same_shape(occ_class))
    throw Error(ErrorKind::kShapeMismatch, "regions_from_labels: label maps differ in shape");
  std::map<int, InstanceRegion> by_id;
  for (std::size_t p = 0; p < fg_instance.size(); ++p) {
    if (const int v = fg_instance[p]) {
      auto& r = by_id[v - 1];
      r.instance_id = v - 1;
      r.class_id = fg_class[p] - 1;
      r.fg_pixels.push_back(static_cast<int>(p));
    }
    if (const int v = occ_instance[p]) {
      auto& r = by_id[v - 1];
      r.instance_id = v - 1;
      r.class_id = occ_class[p] - 1;
      r.occ_pixels.push_back(static_cast<int>(p));
    }
  }
  InstanceRegions out;
  for (auto& [id, r] : by_id) out.push_back(std::move(r));
  return out;
}

std::vector<Vec> instance_means(const FeatureMap& fg, const FeatureMap& occ,
                                const InstanceRegions& regions) {
  const int c = fg.channels;
  std::vector<Vec> means;
  means.reserve(regions.size());
  for (const auto& r : regions) {
    if (r.size() == 0)
      throw Error(ErrorKind::kEmptyInstance,
                  "instance " + std::to_string(r.instance_id) + " has no pixels in either layer");
    Vec mu(c, 0.0);
    for (int p : r.fg_pixels)
      for (int k = 0; k < c; ++k) mu[k] += fg.pixel(p)[k];
    for (int p : r.occ_pixels)
      for (int k = 0; k < c; ++k) mu[k] += occ.pixel(p)[k];
    for (auto& v : mu) v /= static_cast<double>(r.size());
    means.push_back(std::move(mu));
  }
  return means;
}

double variance_loss(const FeatureMap& fg, const FeatureMap& occ, const InstanceRegions& regions,
                     const std::vector<Vec>& means, const LossConfig& config) {
  if (regions.empty()) return 0.0;
  const int c = fg.channels;
  double total = 0.0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& r = regions[i];
    double acc = 0.0;
    for (int p : r.fg_pixels) {
      const double h = hinge(l1_distance(means[i].data(), fg.pixel(p), c) - config.d_var);
      acc += h * h;
    }
    for (int p : r.occ_pixels) {
      const double h = hinge(l1_distance(means[i].data(), occ.pixel(p), c) - config.d_var);
      acc += h * h;
    }
    total += acc / static_cast<double>(r.size());
  }
  return total / static_cast<double>(regions.size());
}

double distance_loss(const std::vector<Vec>& means, const std::vector<int>& classes,
                     const LossConfig& config) {
  if (means.size() != classes.size())
    throw Error(ErrorKind::kShapeMismatch, "distance_loss: one class id per mean required");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < means.size(); ++i) by_class[classes[i]].push_back(i);
  double total = 0.0;
  for (const auto& [k, members] : by_class) {
    if (members.size() < 2) continue;
    const double nk = static_cast<double>(members.size());
    double acc = 0.0;
    for (std::size_t a : members) {
      for (std::size_t b : members) {
        if (a == b) continue;
        const int c = static_cast<int>(means[a].size());
        const double h = hinge(2.0 * config.d_dst - l1_distance(means[a].data(), means[b].data(), c));
        acc += h * h;
      }
    }
    total += acc / (nk * (nk - 1.0));
  }
  return total;
}

double regularization_loss(const std::vector<Vec>& means) {
  if (means.empty()) return 0.0;
  double total = 0.0;
  for (const auto& mu : means)
    for (double v : mu) total += std::abs(v);
  return total / static_cast<double>(means.size());
}

double softmax_cross_entropy(const FeatureMap& logits, const LabelMap& labels, FeatureMap* grad) {
  const std::size_t pixels = logits.pixels();
  const int k = logits.channels;
  if (grad) *grad = FeatureMap(logits.width, logits.height, k);
  if (pixels == 0) return 0.0;
  const double inv_p = 1.0 / static_cast<double>(pixels);
  double total = 0.0;
  std::vector<double> prob(k);
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* z = logits.pixel(p);
    const int y = labels[p];
    if (y >= k)
      throw Error(ErrorKind::kShapeMismatch, "softmax_cross_entropy: label exceeds channel count");
    const double zmax = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += prob[j] = std::exp(z[j] - zmax);
    total += std::log(sum) + zmax - z[y];
    if (grad) {
      double* g = grad->pixel(p);
      for (int j = 0; j < k; ++j) g[j] = (prob[j] / sum - (j == y ? 1.0 : 0.0)) * inv_p;
    }
  }
  return total * inv_p;
}

LossBreakdown total_loss(const LossInputs& in, const LossConfig& config) {
  return compute(in, config, nullptr);
}

LossBreakdown loss_gradient(const LossInputs& in, const LossConfig& config, LossGradient& grad) {
  return compute(in, config, &grad);
}

}  // namespace amodal
