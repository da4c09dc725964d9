#pragma once

// Independent oracles and random generators shared by the unit and
// acceptance suites. Nothing here calls into the code under test beyond
// constructing its value types.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "frustumvox/geometry.hpp"

namespace fvx::testing {

// std::mt19937_64 with std distributions: deliberately not fvx::Rng.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}
  double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(eng_); }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64& engine() { return eng_; }

  OrientedBox3 box(double spread = 1.0) {
    return OrientedBox3({uni(-spread, spread), uni(-spread, spread), uni(-spread, spread)},
                        uni(0.1, 2.0), uni(0.1, 2.0), uni(0.1, 2.0),
                        uni(-std::numbers::pi, std::numbers::pi));
  }
  Aabb3 crop(double spread = 1.0) {
    return Aabb3({uni(-spread, spread), uni(-spread, spread), uni(-spread, spread)},
                 uni(0.2, 3.0), uni(0.2, 3.0));
  }

 private:
  std::mt19937_64 eng_;
};

// Box membership written from scratch: project onto the heading axes.
inline bool in_box(const OrientedBox3& b, const Point3& p) {
  const double c = std::cos(b.yaw()), s = std::sin(b.yaw());
  const double dx = p.x - b.center().x, dy = p.y - b.center().y, dz = p.z - b.center().z;
  const double a = dx * c + dy * s;
  const double d = -dx * s + dy * c;
  return std::abs(a) <= b.width() / 2 && std::abs(d) <= b.depth() / 2 &&
         std::abs(dz) <= b.height() / 2;
}

inline bool in_crop(const Aabb3& c, const Point3& p) {
  return std::abs(p.x - c.center().x) <= c.side() / 2 &&
         std::abs(p.y - c.center().y) <= c.side() / 2 &&
         std::abs(p.z - c.center().z) <= c.height() / 2;
}

struct Estimate {
  double mean;
  double sigma;  // standard error of the mean
};

/// True when a Monte Carlo fraction from n samples lies within k standard
/// errors of the analytic fraction p (the error is computed under p itself,
/// so p = 0 or 1 demands an exact match).
inline bool within_sigma(double p, double observed, int n, double k = 3.0) {
  const double sigma = std::sqrt(std::max(p * (1 - p), 0.0) / n);
  return std::abs(observed - p) <= k * sigma + 1e-12;
}

/// Fraction of the box's volume inside the crop, by uniform sampling in the
/// box's own frame.
inline Estimate mc_box_fraction_in_crop(const OrientedBox3& b, const Aabb3& crop, int n, Gen& g) {
  const double c = std::cos(b.yaw()), s = std::sin(b.yaw());
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const double a = g.uni(-0.5, 0.5) * b.width();
    const double d = g.uni(-0.5, 0.5) * b.depth();
    const double z = g.uni(-0.5, 0.5) * b.height();
    const Point3 p{b.center().x + a * c - d * s, b.center().y + a * s + d * c, b.center().z + z};
    hits += in_crop(crop, p);
  }
  const double f = static_cast<double>(hits) / n;
  return {f, std::sqrt(std::max(f * (1 - f), 1e-12) / n)};
}

/// Volume of a ∩ b by sampling a's own frame.
inline Estimate mc_box_intersection(const OrientedBox3& a, const OrientedBox3& b, int n, Gen& g) {
  const double c = std::cos(a.yaw()), s = std::sin(a.yaw());
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const double u = g.uni(-0.5, 0.5) * a.width();
    const double v = g.uni(-0.5, 0.5) * a.depth();
    const double z = g.uni(-0.5, 0.5) * a.height();
    hits += in_box(b, {a.center().x + u * c - v * s, a.center().y + u * s + v * c, a.center().z + z});
  }
  const double f = static_cast<double>(hits) / n;
  return {f * a.volume(), a.volume() * std::sqrt(std::max(f * (1 - f), 1e-12) / n)};
}

/// Forward pinhole projection written out by hand.
inline bool pinhole(const Point3& cam, double fx, double fy, double cx, double cy, double& u, double& v) {
  if (cam.z <= 0.0) return false;
  u = fx * cam.x / cam.z + cx;
  v = fy * cam.y / cam.z + cy;
  return true;
}

}  // namespace fvx::testing
