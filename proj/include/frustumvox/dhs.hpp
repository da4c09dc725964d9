#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "frustumvox/binary_io.hpp"
#include "frustumvox/camera.hpp"
#include "frustumvox/error.hpp"
#include "frustumvox/geometry.hpp"

namespace fvx {

/// Per-pixel z-depth in meters; values <= 0 mark missing returns.
class RangeImage {
 public:
  RangeImage(CameraIntrinsics intrinsics, Pose pose)
      : intrinsics_(intrinsics), pose_(pose),
        depth_(static_cast<std::size_t>(intrinsics.width()) * intrinsics.height(), 0.0f) {}

  int width() const { return intrinsics_.width(); }
  int height() const { return intrinsics_.height(); }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }
  const Pose& pose() const { return pose_; }

  float depth(int u, int v) const { return depth_[static_cast<std::size_t>(v) * width() + u]; }
  float& depth(int u, int v) { return depth_[static_cast<std::size_t>(v) * width() + u]; }
  bool valid(int u, int v) const { return depth(u, v) > 0.0f; }
  std::span<const float> data() const { return depth_; }

  /// World-frame point behind pixel (u, v); the pixel must be valid.
  Point3 world_point(int u, int v) const {
    return pose_.to_world(unproject({double(u), double(v)}, depth(u, v), intrinsics_));
  }

 private:
  CameraIntrinsics intrinsics_;
  Pose pose_;
  std::vector<float> depth_;
};

// Range image file: "FVRANGE1", width and height as uint32 LE, then
// width*height float32 LE depths in row-major order. Intrinsics and pose
// travel separately (in the manifest).
inline constexpr char kRangeMagic[8] = {'F', 'V', 'R', 'A', 'N', 'G', 'E', '1'};

inline void write_range_image(std::ostream& os, const RangeImage& img) {
  os.write(kRangeMagic, sizeof kRangeMagic);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(img.width()));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(img.height()));
  for (float d : img.data()) io::put_f32(os, d);
}

inline RangeImage read_range_image(std::istream& is, const CameraIntrinsics& k, const Pose& pose) {
  char magic[8];
  is.read(magic, sizeof magic);
  require(is && std::equal(magic, magic + 8, kRangeMagic), "range image: bad magic",
          ErrorCode::format);
  const auto w = io::get_le<std::uint32_t>(is);
  const auto h = io::get_le<std::uint32_t>(is);
  require(static_cast<int>(w) == k.width() && static_cast<int>(h) == k.height(),
          "range image: size does not match intrinsics", ErrorCode::format);
  RangeImage img(k, pose);
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const float d = io::get_f32(is);
      require(std::isfinite(d), "range image: non-finite depth", ErrorCode::format);
      img.depth(u, v) = d;
    }
  }
  return img;
}

struct DhsParams {
  double d_max = 10.0;
  double h_min = -0.5;
  double h_max = 2.5;
};

/// Three planes in [0, 1]: normalized depth, normalized height and
/// normalized signed angle. Missing pixels are zero in every plane.
struct DhsImage {
  int width = 0;
  int height = 0;
  std::vector<float> d;
  std::vector<float> h;
  std::vector<float> s;

  std::size_t at(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
};

/// Elevation of a vector above the horizontal plane, in [-pi/2, pi/2].
inline double elevation(const Point3& vec) {
  return std::atan2(vec.z, std::hypot(vec.x, vec.y));
}

/// Signed angle: elevation of the vector from pixel (u, v)'s point to the
/// point at (u + 1, v), mapped linearly onto [0, 1]. The last column
/// repeats its left neighbour.
inline DhsImage depth_to_dhs(const RangeImage& img, const DhsParams& params = {}) {
  require(params.d_max > 0.0, "dhs: d_max must be positive");
  require(params.h_min < params.h_max, "dhs: h_min must be below h_max");
  const int W = img.width(), H = img.height();
  DhsImage out;
  out.width = W;
  out.height = H;
  const std::size_t n = static_cast<std::size_t>(W) * H;
  out.d.assign(n, 0.0f);
  out.h.assign(n, 0.0f);
  out.s.assign(n, 0.0f);
  const double h_span = params.h_max - params.h_min;

  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (!img.valid(u, v)) continue;
      const std::size_t i = out.at(u, v);
      const Point3 p = img.world_point(u, v);
      out.d[i] = static_cast<float>(std::clamp(img.depth(u, v) / params.d_max, 0.0, 1.0));
      out.h[i] = static_cast<float>(std::clamp((p.z - params.h_min) / h_span, 0.0, 1.0));
      if (u + 1 < W && img.valid(u + 1, v)) {
        const double a = elevation(img.world_point(u + 1, v) - p);
        out.s[i] = static_cast<float>(std::clamp((a + std::numbers::pi / 2) / std::numbers::pi, 0.0, 1.0));
      }
    }
    if (W >= 2 && img.valid(W - 1, v)) out.s[out.at(W - 1, v)] = out.s[out.at(W - 2, v)];
  }
  return out;
}

inline std::uint8_t to_byte(float value) {
  return static_cast<std::uint8_t>(std::floor(std::clamp(value, 0.0f, 1.0f) * 255.0 + 0.5));
}

/// Interleaved 8-bit (D, H, S) buffer, row-major, value * 255 rounded half up.
inline std::vector<std::uint8_t> dhs_to_rgb8(const DhsImage& img) {
  std::vector<std::uint8_t> buf;
  buf.reserve(img.d.size() * 3);
  for (std::size_t i = 0; i < img.d.size(); ++i) {
    buf.push_back(to_byte(img.d[i]));
    buf.push_back(to_byte(img.h[i]));
    buf.push_back(to_byte(img.s[i]));
  }
  return buf;
}

/// Three consecutive float32 LE planes: D, then H, then S.
inline void write_dhs_planes(std::ostream& os, const DhsImage& img) {
  for (const auto* plane : {&img.d, &img.h, &img.s}) {
    for (float f : *plane) io::put_f32(os, f);
  }
}

}  // namespace fvx
