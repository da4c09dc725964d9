#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "frustumvox/error.hpp"

namespace fvx {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Point3 operator+(const Point3& a, const Point3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Point3 operator-(const Point3& a, const Point3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Point3 operator*(double s, const Point3& a) {
    return {s * a.x, s * a.y, s * a.z};
  }
  friend bool operator==(const Point3&, const Point3&) = default;
};

using PointCloud = std::vector<Point3>;

inline double dot(const Point3& a, const Point3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Point3 cross(const Point3& a, const Point3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Point3& a) { return std::sqrt(dot(a, a)); }

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, const Vec2& a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

/// Wraps an angle into [-pi, pi).
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r < 0.0) r += two_pi;
  r -= std::numbers::pi;
  if (r >= std::numbers::pi) r -= two_pi;
  return r;
}

/// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return m[r * 3 + c]; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }

  Point3 operator*(const Point3& p) const {
    return {m[0] * p.x + m[1] * p.y + m[2] * p.z,
            m[3] * p.x + m[4] * p.y + m[5] * p.z,
            m[6] * p.x + m[7] * p.y + m[8] * p.z};
  }

  Mat3 transposed() const {
    return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
  }

  friend Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
      }
    }
    return r;
  }
};

/// Rigid transform from the camera frame (x right, y down, z forward)
/// into the gravity-aligned world frame (+z up).
struct Pose {
  Mat3 rotation;
  Point3 translation;

  Point3 to_world(const Point3& cam) const { return rotation * cam + translation; }
  Point3 to_camera(const Point3& world) const {
    return rotation.transposed() * (world - translation);
  }
  Point3 direction_to_world(const Point3& d) const { return rotation * d; }

  static Pose identity() { return {}; }

  /// Camera at `position` looking horizontally along world heading `yaw`
  /// (0 = +y), tilted down by `pitch` radians.
  static Pose looking(const Point3& position, double yaw = 0.0, double pitch = 0.0) {
    // Level camera facing +y: cam x -> world x, cam y -> world -z, cam z -> world y.
    Mat3 level{{1, 0, 0, 0, 0, 1, 0, -1, 0}};
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    // Pitch about the camera x axis; positive pitch tilts the view down.
    Mat3 tilt{{1, 0, 0, 0, cp, sp, 0, -sp, cp}};
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    // Heading about world z; yaw > 0 turns the view toward -x.
    Mat3 heading{{cy, -sy, 0, sy, cy, 0, 0, 0, 1}};
    return {heading * level * tilt, position};
  }
};

class CameraIntrinsics {
 public:
  CameraIntrinsics(double fx, double fy, double cx, double cy, int width, int height)
      : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height) {
    require(fx > 0.0 && fy > 0.0, "intrinsics: focal lengths must be positive");
    require(width > 0 && height > 0, "intrinsics: image size must be positive");
    require(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height,
            "intrinsics: principal point outside image");
  }

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }

 private:
  double fx_, fy_, cx_, cy_;
  int width_, height_;
};

class Rect2 {
 public:
  Rect2(double u_min, double v_min, double u_max, double v_max)
      : u_min_(u_min), v_min_(v_min), u_max_(u_max), v_max_(v_max) {
    require(std::isfinite(u_min) && std::isfinite(v_min) && std::isfinite(u_max) &&
                std::isfinite(v_max),
            "rect: non-finite coordinate");
    require(u_min < u_max && v_min < v_max, "rect: degenerate (zero or negative area)");
  }

  double u_min() const { return u_min_; }
  double v_min() const { return v_min_; }
  double u_max() const { return u_max_; }
  double v_max() const { return v_max_; }
  double width() const { return u_max_ - u_min_; }
  double height() const { return v_max_ - v_min_; }
  double area() const { return width() * height(); }
  double center_u() const { return 0.5 * (u_min_ + u_max_); }
  double center_v() const { return 0.5 * (v_min_ + v_max_); }

  bool contains(double u, double v) const {
    return u >= u_min_ && u <= u_max_ && v >= v_min_ && v <= v_max_;
  }
  bool contains(const Rect2& o) const {
    return o.u_min_ >= u_min_ && o.u_max_ <= u_max_ && o.v_min_ >= v_min_ &&
           o.v_max_ <= v_max_;
  }

  /// Scales width by `su` and height by `sv` about the rect center.
  Rect2 scaled(double su, double sv) const {
    const double hw = 0.5 * width() * su, hh = 0.5 * height() * sv;
    const double cu = center_u(), cv = center_v();
    return {cu - hw, cv - hh, cu + hw, cv + hh};
  }

  Rect2 shifted(double du, double dv) const {
    return {u_min_ + du, v_min_ + dv, u_max_ + du, v_max_ + dv};
  }

  friend bool operator==(const Rect2&, const Rect2&) = default;

 private:
  double u_min_, v_min_, u_max_, v_max_;
};

/// Amodal box extruded along +z, rotated by `yaw` about the vertical axis.
/// `width` runs along the heading direction, `depth` across it.
class OrientedBox3 {
 public:
  OrientedBox3(Point3 center, double width, double depth, double height, double yaw = 0.0)
      : center_(center), width_(width), depth_(depth), height_(height),
        yaw_(normalize_angle(yaw)) {
    require(is_finite(center) && std::isfinite(yaw), "box: non-finite value");
    require(width > 0.0 && depth > 0.0 && height > 0.0, "box: dimensions must be positive");
  }

  const Point3& center() const { return center_; }
  double width() const { return width_; }
  double depth() const { return depth_; }
  double height() const { return height_; }
  double yaw() const { return yaw_; }
  double z_min() const { return center_.z - 0.5 * height_; }
  double z_max() const { return center_.z + 0.5 * height_; }
  double footprint_area() const { return width_ * depth_; }
  double volume() const { return width_ * depth_ * height_; }

  Vec2 heading() const { return {std::cos(yaw_), std::sin(yaw_)}; }

  /// Footprint corners in counter-clockwise order.
  std::array<Vec2, 4> footprint() const {
    const Vec2 ax = heading();
    const Vec2 ay{-ax.y, ax.x};
    const Vec2 c{center_.x, center_.y};
    const Vec2 hx = (0.5 * width_) * ax, hy = (0.5 * depth_) * ay;
    return {c - hx - hy, c + hx - hy, c + hx + hy, c - hx + hy};
  }

  std::array<Point3, 8> corners() const {
    std::array<Point3, 8> out;
    const auto fp = footprint();
    for (int i = 0; i < 4; ++i) {
      out[i] = {fp[i].x, fp[i].y, z_min()};
      out[i + 4] = {fp[i].x, fp[i].y, z_max()};
    }
    return out;
  }

  /// Point expressed in the box frame (origin at center, x along heading).
  Point3 to_local(const Point3& p) const {
    const double dx = p.x - center_.x, dy = p.y - center_.y;
    const double c = std::cos(yaw_), s = std::sin(yaw_);
    return {c * dx + s * dy, -s * dx + c * dy, p.z - center_.z};
  }

  bool contains(const Point3& p, double tol = 0.0) const {
    const Point3 l = to_local(p);
    return std::abs(l.x) <= 0.5 * width_ + tol && std::abs(l.y) <= 0.5 * depth_ + tol &&
           std::abs(l.z) <= 0.5 * height_ + tol;
  }

  /// Axis-aligned bounds as (min corner, max corner).
  std::pair<Point3, Point3> bounds() const {
    const auto fp = footprint();
    Point3 lo{fp[0].x, fp[0].y, z_min()}, hi{fp[0].x, fp[0].y, z_max()};
    for (const auto& q : fp) {
      lo.x = std::min(lo.x, q.x);
      lo.y = std::min(lo.y, q.y);
      hi.x = std::max(hi.x, q.x);
      hi.y = std::max(hi.y, q.y);
    }
    return {lo, hi};
  }

  OrientedBox3 translated(const Point3& d) const {
    return {center_ + d, width_, depth_, height_, yaw_};
  }
  OrientedBox3 scaled(double s) const {
    return {s * center_, s * width_, s * depth_, s * height_, yaw_};
  }

 private:
  Point3 center_;
  double width_, depth_, height_, yaw_;
};

/// Axis-aligned crop region with a square footprint.
class Aabb3 {
 public:
  Aabb3(Point3 center, double side, double height)
      : center_(center), side_(side), height_(height) {
    require(is_finite(center), "crop: non-finite center");
    require(side > 0.0 && height > 0.0, "crop: side and height must be positive");
  }

  const Point3& center() const { return center_; }
  double side() const { return side_; }
  double height() const { return height_; }
  Point3 min() const {
    return {center_.x - 0.5 * side_, center_.y - 0.5 * side_, center_.z - 0.5 * height_};
  }
  Point3 max() const {
    return {center_.x + 0.5 * side_, center_.y + 0.5 * side_, center_.z + 0.5 * height_};
  }
  double z_min() const { return center_.z - 0.5 * height_; }
  double z_max() const { return center_.z + 0.5 * height_; }
  double volume() const { return side_ * side_ * height_; }

  std::array<Vec2, 4> footprint() const {
    const Point3 lo = min(), hi = max();
    return {Vec2{lo.x, lo.y}, Vec2{hi.x, lo.y}, Vec2{hi.x, hi.y}, Vec2{lo.x, hi.y}};
  }

  /// Closed containment: points on the faces count as inside.
  bool contains(const Point3& p) const {
    const Point3 lo = min(), hi = max();
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
           p.z <= hi.z;
  }

  std::pair<Point3, Point3> bounds() const { return {min(), max()}; }

  Aabb3 translated(const Point3& d) const { return {center_ + d, side_, height_}; }
  Aabb3 scaled(double s) const { return {s * center_, s * side_, s * height_}; }

 private:
  Point3 center_;
  double side_, height_;
};

}  // namespace fvx
