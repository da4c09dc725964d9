#pragma once

#include <array>
#include <string>
#include <string_view>

#include "frustumvox/error.hpp"
#include "frustumvox/geometry.hpp"

namespace fvx {

enum class ScaleName { small_short, medium_short, large_short, medium_tall };

inline constexpr std::array<ScaleName, 4> kAllScales = {
    ScaleName::small_short, ScaleName::medium_short, ScaleName::large_short,
    ScaleName::medium_tall};

inline std::string_view to_string(ScaleName s) {
  switch (s) {
    case ScaleName::small_short: return "small_short";
    case ScaleName::medium_short: return "medium_short";
    case ScaleName::large_short: return "large_short";
    case ScaleName::medium_tall: return "medium_tall";
  }
  return "?";
}

inline ScaleName parse_scale(std::string_view s) {
  for (ScaleName n : kAllScales) {
    if (to_string(n) == s) return n;
  }
  fail(ErrorCode::invalid_argument, "unknown scale '" + std::string(s) + "'");
}

struct GridShape {
  int w = 0;
  int d = 0;
  int h = 0;

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Physical crop size and voxel grid shape of one scale network.
struct ScaleSpec {
  ScaleName name;
  double crop_side;    // m, square footprint
  double crop_height;  // m
  GridShape grid;

  /// Voxel edge lengths in meters along (x, y, z).
  Point3 cell_size() const {
    return {crop_side / grid.w, crop_side / grid.d, crop_height / grid.h};
  }

  Aabb3 crop_at(const Point3& center) const { return {center, crop_side, crop_height}; }
};

inline ScaleSpec scale_spec(ScaleName name) {
  switch (name) {
    case ScaleName::small_short: return {name, 1.6, 1.5, {198, 198, 102}};
    case ScaleName::medium_short: return {name, 3.2, 1.7, {198, 198, 102}};
    case ScaleName::large_short: return {name, 4.8, 2.2, {198, 198, 102}};
    case ScaleName::medium_tall: return {name, 2.8, 3.0, {134, 134, 134}};
  }
  fail(ErrorCode::invalid_argument, "unknown scale");
}

inline constexpr double kShortMaxHeight = 0.55;
inline constexpr double kSmallMaxFootprint = 0.3;
inline constexpr double kMediumMaxFootprint = 0.55;

/// Maps a category's average size to its scale network. Short means
/// h <= 0.55 m; the footprint class uses max(w, d). Small-tall and
/// large-tall objects have no network.
inline ScaleName assign_scale(double avg_w, double avg_d, double avg_h) {
  require(avg_w > 0.0 && avg_d > 0.0 && avg_h > 0.0, "assign_scale: dimensions must be positive");
  const bool tall = avg_h > kShortMaxHeight;
  const double fp = std::max(avg_w, avg_d);
  if (fp <= kSmallMaxFootprint) {
    if (tall) fail(ErrorCode::unsupported_scale, "no scale network for small tall objects");
    return ScaleName::small_short;
  }
  if (fp <= kMediumMaxFootprint) {
    return tall ? ScaleName::medium_tall : ScaleName::medium_short;
  }
  if (tall) fail(ErrorCode::unsupported_scale, "no scale network for large tall objects");
  return ScaleName::large_short;
}

}  // namespace fvx
