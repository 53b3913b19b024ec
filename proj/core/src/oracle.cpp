#include "amodal/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "amodal/error.hpp"
#include "amodal/rng.hpp"

namespace amodal {

void OracleConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kInvalidArgument, "oracle config: " + m); };
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (!(spacing > 0.0)) fail("spacing must be > 0");
  if (!(radius >= 0.0)) fail("radius must be >= 0");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail("sigma must be finite and >= 0");
}

std::uint64_t l1_ball_count(int dim, int r) {
  if (r < 0) return 0;
  // n[k] = points of Z^d with norm <= k, built up one dimension at a time.
  std::vector<std::uint64_t> n(r + 1, 1);
  for (int d = 1; d <= dim; ++d) {
    std::vector<std::uint64_t> next(r + 1, 0);
    for (int k = 0; k <= r; ++k) {
      std::uint64_t s = n[k];
      for (int j = 1; j <= k; ++j) s += 2 * n[k - j];
      next[k] = s;
    }
    n.swap(next);
  }
  return n[r];
}

namespace {

// Appends points with |x|_1 == rem over coordinates [i, dim) in lex order.
void enumerate_shell(std::vector<int>& x, int i, int rem, int count, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(out.size()) >= count) return;
  const int dim = static_cast<int>(x.size());
  if (i == dim - 1) {
    if (rem == 0) {
      x[i] = 0;
      out.push_back(x);
    } else {
      x[i] = -rem;
      out.push_back(x);
      if (static_cast<int>(out.size()) < count) {
        x[i] = rem;
        out.push_back(x);
      }
    }
    return;
  }
  for (int v = -rem; v <= rem; ++v) {
    x[i] = v;
    enumerate_shell(x, i + 1, rem - std::abs(v), count, out);
    if (static_cast<int>(out.size()) >= count) return;
  }
}

int needed_norm(int count, int dim) {
  int r = 0;
  while (l1_ball_count(dim, r) < static_cast<std::uint64_t>(count)) ++r;
  return r;
}

}  // namespace

std::vector<Vec> lattice_targets(int count, int dim, double spacing) {
  std::vector<std::vector<int>> pts;
  std::vector<int> x(dim, 0);
  for (int m = 0; static_cast<int>(pts.size()) < count; ++m) enumerate_shell(x, 0, m, count, pts);
  std::vector<Vec> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    Vec v(dim);
    for (int k = 0; k < dim; ++k) v[k] = spacing * p[k];
    out.push_back(std::move(v));
  }
  return out;
}

double oracle_spacing(int count, const OracleConfig& config) {
  if (config.radius <= 0.0 || count <= 1) return config.spacing;
  const int r = needed_norm(count, config.embed_dim);
  if (config.spacing * r <= config.radius) return config.spacing;
  if (config.compress) return config.radius / r;
  throw Error(ErrorKind::kLatticeInfeasible,
              "oracle lattice: " + std::to_string(count) + " instances need L1 radius " +
                  std::to_string(config.spacing * r) + " at C=" + std::to_string(config.embed_dim) +
                  ", limit is " + std::to_string(config.radius));
}

HeadOutputs oracle_predict(const Sample& sample, const OracleConfig& config) {
  config.validate();
  const auto& r = sample.rendered;
  const auto& scene = sample.scene;
  const int w = r.fg_class.width, h = r.fg_class.height, c = config.embed_dim;
  const int k1 = config.num_classes + 1;

  std::vector<std::vector<int>> by_class(config.num_classes);
  for (const auto& inst : scene.instances) {
    if (inst.class_id < 0 || inst.class_id >= config.num_classes)
      throw Error(ErrorKind::kInvalidArgument,
                  "oracle: instance class " + std::to_string(inst.class_id) + " out of range");
    by_class[inst.class_id].push_back(inst.instance_id);
  }
  std::vector<Vec> target(scene.instances.size());
  for (const auto& ids : by_class) {
    if (ids.empty()) continue;
    auto ts = lattice_targets(static_cast<int>(ids.size()), c,
                              oracle_spacing(static_cast<int>(ids.size()), config));
    auto sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) target[sorted[i]] = ts[i];
  }

  HeadOutputs out;
  out.fg_logits = FeatureMap(w, h, k1);
  out.occ_logits = FeatureMap(w, h, k1);
  out.fg_embed = FeatureMap(w, h, c);
  out.occ_embed = FeatureMap(w, h, c);
  for (std::size_t p = 0; p < out.fg_embed.pixels(); ++p) {
    out.fg_logits.pixel(p)[r.fg_class[p]] = config.logit_margin;
    out.occ_logits.pixel(p)[r.occ_class[p]] = config.logit_margin;
    if (r.fg_instance[p] != 0) {
      const auto& t = target[r.fg_instance[p] - 1];
      std::copy(t.begin(), t.end(), out.fg_embed.pixel(p));
    }
    if (r.occ_instance[p] != 0) {
      const auto& t = target[r.occ_instance[p] - 1];
      std::copy(t.begin(), t.end(), out.occ_embed.pixel(p));
    }
  }
  if (config.sigma > 0.0) {
    const double stddev = config.normalize_noise ? config.sigma / c : config.sigma;
    Rng rng(config.seed);
    for (auto& v : out.fg_embed.values) v += stddev * rng.normal();
    for (auto& v : out.occ_embed.values) v += stddev * rng.normal();
  }
  return out;
}

LabelMap corrupt_labels(const LabelMap& labels, double fraction, int num_labels, std::uint64_t seed) {
  if (num_labels < 2 || !(fraction >= 0.0 && fraction <= 1.0))
    throw Error(ErrorKind::kInvalidArgument, "corrupt_labels: need num_labels >= 2 and fraction in [0,1]");
  LabelMap out = labels;
  std::vector<std::size_t> idx(labels.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());
  const auto flips = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(labels.size())));
  for (std::size_t i = 0; i < flips; ++i) {
    const auto p = idx[i];
    auto v = static_cast<std::uint16_t>(rng.below(num_labels - 1));
    if (v >= out[p]) ++v;
    out[p] = v;
  }
  return out;
}

}  // namespace amodal
