#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "amodal/error.hpp"
#include "amodal/losscore.hpp"
#include "amodal/rng.hpp"

using namespace amodal;

namespace {

FeatureMap field(int w, int h, int c, std::initializer_list<std::pair<int, Vec>> set) {
  FeatureMap m(w, h, c);
  for (const auto& [p, v] : set) std::copy(v.begin(), v.end(), m.pixel(p));
  return m;
}

InstanceRegion region(int id, int cls, std::vector<int> fg, std::vector<int> occ) {
  return InstanceRegion{id, cls, std::move(fg), std::move(occ)};
}

// Straight transcription of the loss definitions, no shared code.
struct NaiveLoss {
  double var = 0, dst = 0, reg = 0;
};

NaiveLoss naive_loss(const FeatureMap& fg, const FeatureMap& occ, const InstanceRegions& rs,
                     const LossConfig& cfg) {
  const int c = fg.channels;
  const int n = static_cast<int>(rs.size());
  std::vector<Vec> mu(n, Vec(c, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int p : rs[i].fg_pixels)
      for (int k = 0; k < c; ++k) mu[i][k] += fg.pixel(p)[k];
    for (int p : rs[i].occ_pixels)
      for (int k = 0; k < c; ++k) mu[i][k] += occ.pixel(p)[k];
    for (auto& v : mu[i]) v /= static_cast<double>(rs[i].size());
  }
  auto dist = [&](const double* a, const Vec& b) {
    double s = 0;
    for (int k = 0; k < c; ++k) s += std::abs(a[k] - b[k]);
    return s;
  };
  auto hinge2 = [](double a) { return a > 0 ? a * a : 0.0; };
  NaiveLoss out;
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int p : rs[i].fg_pixels) s += hinge2(dist(fg.pixel(p), mu[i]) - cfg.d_var);
    for (int p : rs[i].occ_pixels) s += hinge2(dist(occ.pixel(p), mu[i]) - cfg.d_var);
    out.var += s / static_cast<double>(rs[i].size());
  }
  out.var /= n;
  int max_cls = 0;
  for (const auto& r : rs) max_cls = std::max(max_cls, r.class_id);
  for (int k = 0; k <= max_cls; ++k) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (rs[i].class_id == k) members.push_back(i);
    const double nk = static_cast<double>(members.size());
    if (nk < 2) continue;
    double s = 0;
    for (int a : members)
      for (int b : members)
        if (a != b) s += hinge2(2 * cfg.d_dst - dist(mu[a].data(), mu[b]));
    out.dst += s / (nk * (nk - 1));
  }
  for (const auto& m : mu) out.reg += dist(m.data(), Vec(c, 0.0));
  out.reg /= n;
  return out;
}

struct Problem {
  FeatureMap fg, occ, fg_logits, occ_logits;
  LabelMap fg_sem, occ_sem;
  InstanceRegions regions;

  LossInputs inputs() const { return {fg, occ, fg_logits, occ_logits, regions, fg_sem, occ_sem}; }
};

// Random labelled 8x8 problem with `n` instances over `k` classes.
Problem random_problem(std::uint64_t seed, int w = 8, int c = 3, int n = 2, int k = 1) {
  Rng rng(seed);
  Problem p;
  p.fg = FeatureMap(w, w, c);
  p.occ = FeatureMap(w, w, c);
  for (auto& v : p.fg.values) v = rng.uniform(-2, 2);
  for (auto& v : p.occ.values) v = rng.uniform(-2, 2);
  p.fg_logits = FeatureMap(w, w, k + 1);
  p.occ_logits = FeatureMap(w, w, k + 1);
  for (auto& v : p.fg_logits.values) v = rng.uniform(-3, 3);
  for (auto& v : p.occ_logits.values) v = rng.uniform(-3, 3);
  LabelMap fi(w, w), oi(w, w), fc(w, w), oc(w, w);
  std::vector<int> cls(n);
  for (int i = 0; i < n; ++i) cls[i] = static_cast<int>(rng.below(k));
  for (std::size_t q = 0; q < fi.size(); ++q) {
    const int f = static_cast<int>(rng.below(n + 1));
    fi[q] = f;
    fc[q] = f ? cls[f - 1] + 1 : 0;
    if (f && rng.uniform() < 0.4) {
      const int o = static_cast<int>(rng.below(n)) + 1;
      if (o != f) {
        oi[q] = o;
        oc[q] = cls[o - 1] + 1;
      }
    }
  }
  for (int i = 0; i < n; ++i) fi[i] = i + 1, fc[i] = cls[i] + 1, oi[i] = oc[i] = 0;  // every instance present
  p.fg_sem = fc;
  p.occ_sem = oc;
  p.regions = regions_from_labels(fi, oi, fc, oc);
  return p;
}

}  // namespace

TEST(LossConfig, Validation) {
  EXPECT_NO_THROW(LossConfig{}.validate());
  LossConfig c;
  EXPECT_DOUBLE_EQ(c.alpha, 1.0);
  EXPECT_DOUBLE_EQ(c.beta, 1.0);
  EXPECT_DOUBLE_EQ(c.gamma, 1.0);
  EXPECT_DOUBLE_EQ(c.d_var, 0.5);
  EXPECT_DOUBLE_EQ(c.d_dst, 1.5);
  c.d_var = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.d_dst = 0.4;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.beta = -1;
  EXPECT_THROW(c.validate(), Error);
}

TEST(InstanceMeans, Examples) {
  const auto e = field(3, 1, 2, {{1, {0.7, -1.2}}});
  const FeatureMap zero(3, 1, 2);
  auto mu = instance_means(e, zero, {region(0, 0, {1}, {})});
  EXPECT_EQ(mu[0], (Vec{0.7, -1.2}));

  const auto fg = field(3, 1, 2, {{0, {0, 0}}});
  const auto occ = field(3, 1, 2, {{2, {2, 0}}});
  mu = instance_means(fg, occ, {region(0, 0, {0}, {2})});
  EXPECT_EQ(mu[0], (Vec{1, 0}));

  const FeatureMap c1(4, 4, 3, 0.25), c2(4, 4, 3, 0.25);
  mu = instance_means(c1, c2, {region(0, 0, {0, 1}, {5}), region(1, 1, {7}, {2, 3})});
  for (const auto& m : mu) EXPECT_EQ(m, (Vec{0.25, 0.25, 0.25}));

  EXPECT_THROW(instance_means(c1, c2, {region(0, 0, {}, {})}), Error);
}

TEST(VarianceLoss, Examples) {
  LossConfig cfg;
  const FeatureMap none(3, 1, 2);
  auto fg = field(3, 1, 2, {{0, {0, 0}}, {1, {1, 0}}});
  InstanceRegions r{region(0, 0, {0, 1}, {})};
  auto mu = instance_means(fg, none, r);
  EXPECT_EQ(mu[0], (Vec{0.5, 0}));
  EXPECT_DOUBLE_EQ(variance_loss(fg, none, r, mu, cfg), 0.0);

  fg = field(3, 1, 2, {{0, {0, 0}}, {1, {2, 0}}});
  mu = instance_means(fg, none, r);
  EXPECT_DOUBLE_EQ(variance_loss(fg, none, r, mu, cfg), 0.25);

  fg = field(3, 1, 2, {{0, {0.1, 0.1}}, {1, {0.2, 0.0}}, {2, {0.0, 0.2}}});
  r = {region(0, 0, {0, 1, 2}, {})};
  mu = instance_means(fg, none, r);
  EXPECT_DOUBLE_EQ(variance_loss(fg, none, r, mu, cfg), 0.0);
}

TEST(DistanceLoss, Examples) {
  LossConfig cfg;
  EXPECT_DOUBLE_EQ(distance_loss({{0, 0}, {3, 0}}, {0, 0}, cfg), 0.0);
  EXPECT_DOUBLE_EQ(distance_loss({{0, 0}, {1, 0}}, {0, 0}, cfg), 4.0);
  EXPECT_DOUBLE_EQ(distance_loss({{0, 0}, {0, 0}}, {0, 1}, cfg), 0.0);
  EXPECT_DOUBLE_EQ(distance_loss({{0.0}}, {0}, cfg), 0.0);
  // Three in one class: pairs (0,1) d=1 -> 4, (0,2) d=2 -> 1, (1,2) d=1 -> 4;
  // ordered sum 18 over 3*2.
  EXPECT_DOUBLE_EQ(distance_loss({{0.0}, {1.0}, {2.0}}, {0, 0, 0}, cfg), 3.0);
}

TEST(RegularizationLoss, Examples) {
  EXPECT_DOUBLE_EQ(regularization_loss({{0, 0}, {0, 0}}), 0.0);
  EXPECT_DOUBLE_EQ(regularization_loss({{1, -2}}), 3.0);
  EXPECT_DOUBLE_EQ(regularization_loss({{1, 0}, {0, 1}}), 1.0);
}

TEST(SoftmaxCrossEntropy, UniformLogits) {
  FeatureMap logits(2, 2, 4);
  LabelMap labels(2, 2);
  labels[1] = 3;
  EXPECT_NEAR(softmax_cross_entropy(logits, labels), std::log(4.0), 1e-12);
  labels[2] = 4;
  EXPECT_THROW(softmax_cross_entropy(logits, labels), Error);
}

TEST(TotalLoss, MatchesNaiveTranscription) {
  LossConfig cfg;
  cfg.alpha = 0.7;
  cfg.beta = 1.3;
  cfg.gamma = 0.4;
  cfg.semantic_weight = 0.9;
  for (int s = 0; s < 10; ++s) {
    const auto p = random_problem(100 + s, 8, 3, 4, 2);
    const auto got = total_loss(p.inputs(), cfg);
    const auto want = naive_loss(p.fg, p.occ, p.regions, cfg);
    EXPECT_NEAR(got.l_var, want.var, 1e-12);
    EXPECT_NEAR(got.l_dst, want.dst, 1e-12);
    EXPECT_NEAR(got.l_reg, want.reg, 1e-12);
    const double sem = softmax_cross_entropy(p.fg_logits, p.fg_sem) +
                       softmax_cross_entropy(p.occ_logits, p.occ_sem);
    EXPECT_NEAR(got.l_semantic, sem, 1e-12);
    EXPECT_NEAR(got.total, 0.7 * got.l_var + 1.3 * got.l_dst + 0.4 * got.l_reg + 0.9 * sem, 1e-12);
    EXPECT_GE(got.l_var, 0);
    EXPECT_GE(got.l_dst, 0);
    EXPECT_GE(got.l_reg, 0);
    EXPECT_GE(got.l_semantic, 0);
  }
}

TEST(TotalLoss, ZeroWeightsGiveZero) {
  LossConfig cfg;
  cfg.alpha = cfg.beta = cfg.gamma = cfg.semantic_weight = 0;
  const auto p = random_problem(3);
  EXPECT_EQ(total_loss(p.inputs(), cfg).total, 0.0);
}

TEST(TotalLoss, ZeroLossCertificate) {
  // Two same-class instances with constant embeddings (3, 0) and (0, 3).
  FeatureMap fg(4, 1, 2), occ(4, 1, 2);
  for (int p : {0, 1}) fg.pixel(p)[0] = 3;
  fg.pixel(2)[1] = 3;
  occ.pixel(1)[1] = 3;
  FeatureMap fl(4, 1, 2), ol(4, 1, 2);
  LabelMap fs(4, 1), os(4, 1);
  InstanceRegions r{region(0, 0, {0, 1}, {}), region(1, 0, {2}, {1})};
  LossConfig cfg;
  const auto b = total_loss({fg, occ, fl, ol, r, fs, os}, cfg);
  EXPECT_EQ(b.l_var, 0.0);
  EXPECT_EQ(b.l_dst, 0.0);
  EXPECT_DOUBLE_EQ(b.l_reg, 3.0);
  EXPECT_DOUBLE_EQ(b.total, b.l_reg + b.l_semantic);
}

TEST(LossProperties, PermutationInvariance) {
  LossConfig cfg;
  for (int s = 0; s < 5; ++s) {
    auto p = random_problem(200 + s, 8, 2, 5, 2);
    const auto a = total_loss(p.inputs(), cfg);
    std::reverse(p.regions.begin(), p.regions.end());
    for (auto& r : p.regions) r.instance_id = 100 - r.instance_id;
    const auto b = total_loss(p.inputs(), cfg);
    EXPECT_NEAR(a.l_var, b.l_var, 1e-12);
    EXPECT_NEAR(a.l_dst, b.l_dst, 1e-12);
    EXPECT_NEAR(a.l_reg, b.l_reg, 1e-12);
  }
}

TEST(LossProperties, TranslationInvariance) {
  LossConfig cfg;
  for (int s = 0; s < 5; ++s) {
    auto p = random_problem(300 + s, 8, 3, 3, 1);
    const auto a = total_loss(p.inputs(), cfg);
    const double shift[3] = {0.75, -1.5, 2.0};
    for (auto* m : {&p.fg, &p.occ})
      for (std::size_t q = 0; q < m->pixels(); ++q)
        for (int k = 0; k < 3; ++k) m->pixel(q)[k] += shift[k];
    const auto b = total_loss(p.inputs(), cfg);
    EXPECT_NEAR(a.l_var, b.l_var, 1e-9);
    EXPECT_NEAR(a.l_dst, b.l_dst, 1e-9);
    EXPECT_GT(std::abs(a.l_reg - b.l_reg), 1e-3);
  }
}

TEST(LossGradient, InactiveVarianceHasZeroGradient) {
  LossConfig cfg;
  cfg.beta = cfg.gamma = cfg.semantic_weight = 0;
  auto fg = field(3, 1, 2, {{0, {0.1, 0.1}}, {1, {0.2, 0.0}}, {2, {0.0, 0.2}}});
  FeatureMap occ(3, 1, 2), fl(3, 1, 2), ol(3, 1, 2);
  LabelMap fs(3, 1), os(3, 1);
  InstanceRegions r{region(0, 0, {0, 1, 2}, {})};
  LossGradient g;
  const auto b = loss_gradient({fg, occ, fl, ol, r, fs, os}, cfg, g);
  EXPECT_EQ(b.l_var, 0.0);
  for (double v : g.fg_embed.values) EXPECT_EQ(v, 0.0);
  for (double v : g.occ_embed.values) EXPECT_EQ(v, 0.0);
}

TEST(LossGradient, RegularizationSign) {
  LossConfig cfg;
  cfg.alpha = cfg.beta = cfg.semantic_weight = 0;
  auto fg = field(1, 1, 2, {{0, {2.0, -0.5}}});
  FeatureMap occ(1, 1, 2), fl(1, 1, 2), ol(1, 1, 2);
  LabelMap fs(1, 1), os(1, 1);
  LossGradient g;
  loss_gradient({fg, occ, fl, ol, {region(0, 0, {0}, {})}, fs, os}, cfg, g);
  EXPECT_DOUBLE_EQ(g.fg_embed.values[0], 1.0);
  EXPECT_DOUBLE_EQ(g.fg_embed.values[1], -1.0);
}

TEST(LossGradient, FiniteDifferenceOnRandomInstances) {
  LossConfig cfg;
  cfg.semantic_weight = 0.8;
  const double h = 1e-4;
  double worst = 0;
  int checked = 0, skipped = 0;
  for (int s = 0; s < 24; ++s) {
    auto p = random_problem(1000 + s, 8, 3, 2 + s % 3, 1 + s % 2);
    LossGradient g;
    loss_gradient(p.inputs(), cfg, g);
    struct Slot {
      FeatureMap* x;
      const FeatureMap* dx;
    };
    for (Slot slot : {Slot{&p.fg, &g.fg_embed}, Slot{&p.occ, &g.occ_embed},
                      Slot{&p.fg_logits, &g.fg_logits}, Slot{&p.occ_logits, &g.occ_logits}}) {
      for (std::size_t i = 0; i < slot.x->values.size(); ++i) {
        double& v = slot.x->values[i];
        const double v0 = v;
        const double f0 = total_loss(p.inputs(), cfg).total;
        v = v0 + h;
        const double fp = total_loss(p.inputs(), cfg).total;
        v = v0 - h;
        const double fm = total_loss(p.inputs(), cfg).total;
        v = v0;
        // A kink inside [v0-h, v0+h] shows up as disagreeing one-sided slopes.
        const double right = (fp - f0) / h, left = (f0 - fm) / h;
        if (std::abs(right - left) > 1e-2 * std::max(1.0, std::abs(right) + std::abs(left))) {
          ++skipped;
          continue;
        }
        const double fd = (fp - fm) / (2 * h);
        const double an = slot.dx->values[i];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        if (std::abs(fd - an) > 1e-9) worst = std::max(worst, rel);
        ++checked;
      }
    }
  }
  EXPECT_LT(worst, 1e-4);
  EXPECT_GT(checked, 20 * 200);
  EXPECT_LT(skipped, checked / 20);
}

TEST(Regions, FromLabels) {
  LabelMap fi(3, 1), oi(3, 1), fc(3, 1), oc(3, 1);
  fi[0] = 2, fc[0] = 1;
  fi[1] = 3, fc[1] = 2;
  oi[1] = 2, oc[1] = 1;
  const auto r = regions_from_labels(fi, oi, fc, oc);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].instance_id, 1);
  EXPECT_EQ(r[0].class_id, 0);
  EXPECT_EQ(r[0].fg_pixels, std::vector<int>{0});
  EXPECT_EQ(r[0].occ_pixels, std::vector<int>{1});
  EXPECT_EQ(r[1].instance_id, 2);
  EXPECT_EQ(r[1].class_id, 1);
  EXPECT_THROW(regions_from_labels(fi, LabelMap(2, 1), fc, oc), Error);
}
