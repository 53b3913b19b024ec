#pragma once

// Point-in-shape and depth-sort written against the shape definitions
// directly (local frame after undoing the rotation), independent of
// amodal::ShapeGeometry.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "amodal/scenegen.hpp"

namespace oracle {

// Signed margin: > 0 inside, < 0 outside (not a true distance for polygons).
inline double inside_margin(amodal::ShapeKind kind, double cx, double cy, double theta, double r,
                            double x, double y) {
  const double dx = x - cx, dy = y - cy;
  const double lx = std::cos(theta) * dx + std::sin(theta) * dy;
  const double ly = -std::sin(theta) * dx + std::cos(theta) * dy;
  switch (kind) {
    case amodal::ShapeKind::kCircle:
      return r - std::hypot(lx, ly);
    case amodal::ShapeKind::kRectangle: {
      const double a = 3.0 * r / std::sqrt(13.0), b = 2.0 * r / std::sqrt(13.0);
      return std::min(a - std::abs(lx), b - std::abs(ly));
    }
    case amodal::ShapeKind::kTriangle: {
      // Vertex at angle 0; edge normals at 60, 180 and 300 degrees, apothem r/2.
      double m = INFINITY;
      for (double deg : {60.0, 180.0, 300.0}) {
        const double t = deg * std::numbers::pi / 180.0;
        m = std::min(m, 0.5 * r - (lx * std::cos(t) + ly * std::sin(t)));
      }
      return m;
    }
  }
  return -1.0;
}

inline double inside_margin(const amodal::Scene& s, const amodal::ShapeInstance& i, double x, double y) {
  return inside_margin(s.classes[i.class_id], i.cx, i.cy, i.orientation, s.shape_scale, x, y);
}

// Instances covering (x, y), topmost first.
inline std::vector<int> cover(const amodal::Scene& s, double x, double y) {
  std::vector<const amodal::ShapeInstance*> hit;
  for (const auto& i : s.instances)
    if (inside_margin(s, i, x, y) >= 0.0) hit.push_back(&i);
  std::sort(hit.begin(), hit.end(), [](auto* a, auto* b) { return a->depth_rank < b->depth_rank; });
  std::vector<int> ids;
  for (auto* i : hit) ids.push_back(i->instance_id);
  return ids;
}

// True when (x, y) is within `eps` of some shape boundary.
inline bool near_boundary(const amodal::Scene& s, double x, double y, double eps) {
  for (const auto& i : s.instances)
    if (std::abs(inside_margin(s, i, x, y)) < eps) return true;
  return false;
}

}  // namespace oracle
