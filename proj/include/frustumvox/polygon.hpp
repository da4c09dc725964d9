#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "frustumvox/geometry.hpp"

namespace fvx {

using Polygon2 = std::vector<Vec2>;

/// Shoelace area; positive for counter-clockwise vertex order.
inline double signed_area(std::span<const Vec2> poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    twice += cross(poly[i], poly[(i + 1) % n]);
  }
  return 0.5 * twice;
}

inline double polygon_area(std::span<const Vec2> poly) {
  return std::abs(signed_area(poly));
}

/// Sutherland-Hodgman clip of `subject` against the convex counter-clockwise
/// polygon `clipper`. The result is convex whenever `subject` is.
inline Polygon2 clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clipper) {
  Polygon2 out(subject.begin(), subject.end());
  const std::size_t m = clipper.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Vec2 a = clipper[e];
    const Vec2 b = clipper[(e + 1) % m];
    const Vec2 edge = b - a;
    auto side = [&](const Vec2& p) { return cross(edge, p - a); };

    Polygon2 input;
    input.swap(out);
    for (std::size_t i = 0, n = input.size(); i < n; ++i) {
      const Vec2& cur = input[i];
      const Vec2& nxt = input[(i + 1) % n];
      const double sc = side(cur);
      const double sn = side(nxt);
      if (sc >= 0.0) out.push_back(cur);
      if ((sc >= 0.0) != (sn >= 0.0)) {
        const double t = sc / (sc - sn);
        out.push_back(cur + t * (nxt - cur));
      }
    }
  }
  if (out.size() < 3) out.clear();
  return out;
}

struct ClippedFootprint {
  Polygon2 polygon;
  double area = 0.0;
};

/// Intersection of the box footprint with the crop's square footprint.
inline ClippedFootprint clip_footprint(const OrientedBox3& box, const Aabb3& crop) {
  const auto quad = box.footprint();
  const auto square = crop.footprint();
  ClippedFootprint out;
  out.polygon = clip_convex(quad, square);
  out.area = polygon_area(out.polygon);
  return out;
}

}  // namespace fvx
