#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "frustumvox/camera.hpp"
#include "frustumvox/error.hpp"
#include "frustumvox/geometry.hpp"

namespace fvx {

struct DepthRange {
  double near = 0.1;
  double far = 10.0;
};

// Absolute tolerance, in pixels, applied to the lateral frustum planes.
inline constexpr double kFrustumTolerance = 1e-9;

enum class Containment { inside, boundary, outside };

/// Prism with its apex at the sensor, bounded laterally by the planes through
/// the rect edges and axially by the near/far depth planes.
class Frustum {
 public:
  Frustum(Rect2 rect, CameraIntrinsics intrinsics, Pose pose, DepthRange range = {})
      : rect_(rect), intrinsics_(intrinsics), pose_(pose), range_(range) {
    require(range.near > 0.0 && range.near < range.far, "frustum: need 0 < near < far");
  }

  const Rect2& rect() const { return rect_; }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  const Pose& pose() const { return pose_; }
  double near() const { return range_.near; }
  double far() const { return range_.far; }
  DepthRange range() const { return range_; }
  Point3 apex() const { return pose_.translation; }

  /// Half-open membership: the min edges are closed (widened by the
  /// tolerance), the max edges open (narrowed by it), so subfrustums of an
  /// equal subdivision partition their parent exactly.
  bool contains(const Point3& world) const {
    const Point3 c = pose_.to_camera(world);
    if (!(c.z > range_.near && c.z < range_.far)) return false;
    const double u = intrinsics_.fx() * c.x / c.z + intrinsics_.cx();
    const double v = intrinsics_.fy() * c.y / c.z + intrinsics_.cy();
    return u - rect_.u_min() >= -kFrustumTolerance && rect_.u_max() - u > kFrustumTolerance &&
           v - rect_.v_min() >= -kFrustumTolerance && rect_.v_max() - v > kFrustumTolerance;
  }

  Containment classify(const Point3& world) const {
    const Point3 c = pose_.to_camera(world);
    if (!(c.z >= range_.near && c.z <= range_.far)) return Containment::outside;
    const double u = intrinsics_.fx() * c.x / c.z + intrinsics_.cx();
    const double v = intrinsics_.fy() * c.y / c.z + intrinsics_.cy();
    const double d[4] = {u - rect_.u_min(), rect_.u_max() - u, v - rect_.v_min(),
                         rect_.v_max() - v};
    bool on_edge = c.z == range_.near || c.z == range_.far;
    for (double di : d) {
      if (di < -kFrustumTolerance) return Containment::outside;
      if (di <= kFrustumTolerance) on_edge = true;
    }
    return on_edge ? Containment::boundary : Containment::inside;
  }

  /// Corner rays in the world frame, ordered (u_min,v_min), (u_max,v_min),
  /// (u_max,v_max), (u_min,v_max); each has unit camera-frame depth.
  std::array<Point3, 4> corner_rays() const {
    const Pixel px[4] = {{rect_.u_min(), rect_.v_min()},
                         {rect_.u_max(), rect_.v_min()},
                         {rect_.u_max(), rect_.v_max()},
                         {rect_.u_min(), rect_.v_max()}};
    std::array<Point3, 4> out;
    for (int i = 0; i < 4; ++i) {
      out[i] = pose_.direction_to_world(pixel_ray(px[i], intrinsics_));
    }
    return out;
  }

 private:
  Rect2 rect_;
  CameraIntrinsics intrinsics_;
  Pose pose_;
  DepthRange range_;
};

inline Frustum frustum_from_rect(const Rect2& rect, const CameraIntrinsics& k,
                                 const Pose& pose, DepthRange range = {}) {
  return Frustum(rect, k, pose, range);
}

/// Splits `rect` into rows x cols equal cells in row-major order. Shared
/// edges are computed once, so neighbouring cells meet exactly.
inline std::vector<Rect2> subdivide_rect(const Rect2& rect, int rows, int cols) {
  require(rows >= 1 && cols >= 1, "subdivide_rect: rows and cols must be >= 1");
  auto edges = [](double lo, double hi, int n) {
    std::vector<double> e(n + 1);
    for (int i = 0; i < n; ++i) e[i] = lo + (hi - lo) * i / n;
    e[n] = hi;
    return e;
  };
  const auto ue = edges(rect.u_min(), rect.u_max(), cols);
  const auto ve = edges(rect.v_min(), rect.v_max(), rows);
  std::vector<Rect2> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out.emplace_back(ue[c], ve[r], ue[c + 1], ve[r + 1]);
    }
  }
  return out;
}

inline std::vector<std::size_t> points_in_frustum(std::span<const Point3> cloud,
                                                  const Frustum& f) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (f.contains(cloud[i])) idx.push_back(i);
  }
  return idx;
}

inline PointCloud crop_to_frustum(std::span<const Point3> cloud, const Frustum& f) {
  PointCloud out;
  for (const auto& p : cloud) {
    if (f.contains(p)) out.push_back(p);
  }
  return out;
}

enum class CenterMode { average, median };

inline std::string_view to_string(CenterMode m) {
  return m == CenterMode::average ? "average" : "median";
}

inline CenterMode parse_center_mode(std::string_view s) {
  if (s == "average") return CenterMode::average;
  if (s == "median") return CenterMode::median;
  fail(ErrorCode::invalid_argument, "unknown center mode '" + std::string(s) + "'");
}

/// Coordinate-wise mean or lower-middle median of a non-empty point set.
inline Point3 point_center(std::span<const Point3> pts, CenterMode mode) {
  require(!pts.empty(), "frustum contains no points", ErrorCode::no_center);
  if (mode == CenterMode::average) {
    Point3 sum;
    for (const auto& p : pts) sum = sum + p;
    return (1.0 / static_cast<double>(pts.size())) * sum;
  }
  const std::size_t mid = (pts.size() - 1) / 2;
  auto lower_middle = [&](auto coord) {
    std::vector<double> v;
    v.reserve(pts.size());
    for (const auto& p : pts) v.push_back(coord(p));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    return v[mid];
  };
  return {lower_middle([](const Point3& p) { return p.x; }),
          lower_middle([](const Point3& p) { return p.y; }),
          lower_middle([](const Point3& p) { return p.z; })};
}

inline Point3 frustum_center(std::span<const Point3> cloud, const Frustum& f,
                             CenterMode mode) {
  const PointCloud inside = crop_to_frustum(cloud, f);
  require(!inside.empty(), "frustum contains no points", ErrorCode::no_center);
  return point_center(inside, mode);
}

}  // namespace fvx
