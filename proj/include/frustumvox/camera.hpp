#pragma once

#include <cmath>
#include <optional>

#include "frustumvox/error.hpp"
#include "frustumvox/geometry.hpp"

namespace fvx {

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

inline bool in_image(const Pixel& px, const CameraIntrinsics& k) {
  return px.u >= 0.0 && px.u < k.width() && px.v >= 0.0 && px.v < k.height();
}

/// Pinhole back-projection of a pixel at z-depth `depth` into the camera frame.
inline Point3 unproject(const Pixel& px, double depth, const CameraIntrinsics& k) {
  require(std::isfinite(depth) && depth > 0.0, "unproject: depth must be positive");
  require(std::isfinite(px.u) && std::isfinite(px.v) && in_image(px, k),
          "unproject: pixel outside image");
  return {(px.u - k.cx()) * depth / k.fx(), (px.v - k.cy()) * depth / k.fy(), depth};
}

/// Forward pinhole projection; empty for points at or behind the camera plane.
inline std::optional<Pixel> project(const Point3& cam, const CameraIntrinsics& k) {
  if (!(cam.z > 0.0)) return std::nullopt;
  return Pixel{k.fx() * cam.x / cam.z + k.cx(), k.fy() * cam.y / cam.z + k.cy()};
}

/// Camera-frame ray direction through a pixel, scaled so its z component is 1.
inline Point3 pixel_ray(const Pixel& px, const CameraIntrinsics& k) {
  return {(px.u - k.cx()) / k.fx(), (px.v - k.cy()) / k.fy(), 1.0};
}

}  // namespace fvx
