#pragma once

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstdint>
#include <span>
#include <tuple>
#include <utility>

#include "frustumvox/geometry.hpp"
#include "frustumvox/polygon.hpp"
#include "frustumvox/rng.hpp"

namespace fvx {

// Intersection over Itself: how much of a ground-truth box a crop encloses,
// measured against the box's own extent. Deliberately asymmetric.
struct IoiBreakdown {
  double ioi_xy = 0.0;
  double ioi_z = 0.0;
  double ioi_3d = 0.0;
};

inline double interval_overlap(double a_lo, double a_hi, double b_lo, double b_hi) {
  return std::max(0.0, std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
}

/// Planar, vertical and volumetric IoI of `box` with respect to `crop`.
/// `ioi_3d` is computed from the intersection volume directly, independent of
/// the planar and vertical ratios; for z-extruded shapes it equals their product.
inline IoiBreakdown ioi(const OrientedBox3& box, const Aabb3& crop) {
  // Full containment is decided on the corners so it scores exactly 1
  // instead of a clipped area a few ulps short.
  const Point3 lo = crop.min(), hi = crop.max();
  const auto fp = box.footprint();
  const bool inside_xy = std::all_of(fp.begin(), fp.end(), [&](const Vec2& q) {
    return q.x >= lo.x && q.x <= hi.x && q.y >= lo.y && q.y <= hi.y;
  });
  const bool inside_z = box.z_min() >= lo.z && box.z_max() <= hi.z;
  const double area = inside_xy ? box.footprint_area() : clip_footprint(box, crop).area;
  const double overlap_z =
      inside_z ? box.height() : interval_overlap(box.z_min(), box.z_max(), crop.z_min(), crop.z_max());
  IoiBreakdown r;
  r.ioi_xy = std::min(1.0, area / box.footprint_area());
  r.ioi_z = std::min(1.0, overlap_z / box.height());
  r.ioi_3d = std::min(1.0, (area * overlap_z) / box.volume());
  return r;
}

/// Axis-aligned 2D intersection over union.
inline double iou_2d(const Rect2& a, const Rect2& b) {
  const double inter = interval_overlap(a.u_min(), a.u_max(), b.u_min(), b.u_max()) *
                       interval_overlap(a.v_min(), a.v_max(), b.v_min(), b.v_max());
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline double intersection_volume(const OrientedBox3& a, const OrientedBox3& b) {
  const double overlap_z = interval_overlap(a.z_min(), a.z_max(), b.z_min(), b.z_max());
  if (overlap_z <= 0.0) return 0.0;
  const auto fa = a.footprint();
  const auto fb = b.footprint();
  return polygon_area(clip_convex(fa, fb)) * overlap_z;
}

/// Volumetric IoU of two z-extruded oriented boxes. The pair is put in a
/// fixed order first so swapping the arguments gives bit-identical results.
inline double iou_3d(const OrientedBox3& a, const OrientedBox3& b) {
  auto key = [](const OrientedBox3& x) {
    return std::tuple{x.center().x, x.center().y, x.center().z, x.width(), x.depth(), x.height(), x.yaw()};
  };
  const double inter = key(a) <= key(b) ? intersection_volume(a, b) : intersection_volume(b, a);
  const double uni = a.volume() + b.volume() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

template <typename S>
concept SampledShape = requires(const S& s, const Point3& p) {
  { s.contains(p) } -> std::convertible_to<bool>;
  { s.bounds() } -> std::convertible_to<std::pair<Point3, Point3>>;
};

/// Rejection-sampling estimate of vol(a ∩ b) over the bounding box of `a`.
template <SampledShape A, SampledShape B>
MonteCarloEstimate mc_intersection_volume(const A& a, const B& b, std::uint64_t n_samples,
                                          std::uint64_t seed) {
  require(n_samples >= 1000, "mc_intersection_volume: need at least 1000 samples");
  const auto [lo, hi] = a.bounds();
  const double region = (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
  Rng rng(seed);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    const Point3 p{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
    if (a.contains(p) && b.contains(p)) ++hits;
  }
  const double n = static_cast<double>(n_samples);
  const double frac = static_cast<double>(hits) / n;
  return {region * frac, region * std::sqrt(frac * (1.0 - frac) / n)};
}

}  // namespace fvx
