#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "frustumvox/dataset.hpp"
#include "frustumvox/error.hpp"
#include "frustumvox/frustum.hpp"
#include "frustumvox/ioi.hpp"
#include "frustumvox/parallel.hpp"
#include "frustumvox/recall.hpp"
#include "frustumvox/rng.hpp"
#include "frustumvox/scale.hpp"

namespace fvx {

// ---------------------------------------------------------------------------
// Candidate centers

/// One center per non-empty subfrustum of a rows x cols split of `rect`,
/// in row-major order. Empty subfrustums are skipped.
inline std::vector<Point3> candidate_centers(std::span<const Point3> cloud, const Rect2& rect,
                                             const CameraIntrinsics& k, const Pose& pose,
                                             int rows, int cols, CenterMode mode,
                                             DepthRange range = {}) {
  const auto cells = subdivide_rect(rect, rows, cols);
  std::vector<PointCloud> buckets(cells.size());
  std::vector<Frustum> frustums;
  frustums.reserve(cells.size());
  for (const auto& c : cells) frustums.emplace_back(c, k, pose, range);
  for (const auto& p : cloud) {
    for (std::size_t i = 0; i < frustums.size(); ++i) {
      if (frustums[i].contains(p)) {
        buckets[i].push_back(p);
        break;  // subfrustums partition the parent
      }
    }
  }
  std::vector<Point3> out;
  for (const auto& b : buckets) {
    if (!b.empty()) out.push_back(point_center(b, mode));
  }
  require(!out.empty(), "every subfrustum is empty", ErrorCode::no_candidates);
  return out;
}

// ---------------------------------------------------------------------------
// Best crop among candidates

struct CropChoice {
  Aabb3 crop;
  IoiBreakdown ioi;
  std::size_t index = 0;
};

/// Crop of the given scale centered at each candidate; returns the one with
/// the highest volumetric IoI, lowest index on ties.
inline CropChoice best_cropbox(const OrientedBox3& gt, std::span<const Point3> candidates,
                               const ScaleSpec& spec) {
  require(!candidates.empty(), "best_cropbox: no candidates", ErrorCode::no_candidates);
  std::optional<CropChoice> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Aabb3 crop = spec.crop_at(candidates[i]);
    const IoiBreakdown v = ioi(gt, crop);
    if (!best || v.ioi_3d > best->ioi.ioi_3d) best = CropChoice{crop, v, i};
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Recall curves and size selection

struct SubdivisionConfig {
  int rows = 1;
  int cols = 1;

  friend bool operator==(const SubdivisionConfig&, const SubdivisionConfig&) = default;
};

struct SizeSearchConfig {
  std::vector<double> side_candidates;
  std::vector<double> height_candidates;
  // Per-axis IoI needed for a crop to count as positive.
  double threshold_xy = 0.90;
  double threshold_z = 0.90;
  // Per-axis recall the selected size must reach.
  double target_xy = 0.90;
  double target_z = 0.95;
  std::vector<SubdivisionConfig> subdivisions{{1, 1}, {3, 3}, {5, 5}};
  DepthRange range;
  unsigned threads = 0;

  void validate() const {
    auto increasing = [](const std::vector<double>& v) {
      if (v.empty()) return false;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0) || (i > 0 && !(v[i] > v[i - 1]))) return false;
      }
      return true;
    };
    require(increasing(side_candidates), "size search: side candidates must be positive and strictly increasing");
    require(increasing(height_candidates), "size search: height candidates must be positive and strictly increasing");
    require(threshold_xy > 0.0 && threshold_xy <= 1.0 && threshold_z > 0.0 && threshold_z <= 1.0,
            "size search: thresholds must lie in (0, 1]");
    require(target_xy > 0.0 && target_xy <= 1.0 && target_z > 0.0 && target_z <= 1.0,
            "size search: targets must lie in (0, 1]");
    require(!subdivisions.empty(), "size search: no subdivisions configured");
    for (const auto& s : subdivisions) {
      require(s.rows >= 1 && s.cols >= 1, "size search: subdivision must be at least 1x1");
    }
  }

  /// Evenly spaced candidates lo, lo+step, ..., up to hi inclusive.
  static std::vector<double> range_of(double lo, double hi, double step) {
    std::vector<double> v;
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) v.push_back(lo + step * static_cast<double>(i));
    return v;
  }
};

struct CurveRow {
  SubdivisionConfig subdivision;
  CenterMode mode = CenterMode::average;
  double side = 0.0;
  double height = 0.0;
  double recall_xy = 0.0;
  double recall_z = 0.0;
  // One crop per item, the candidate with the largest IoI_3d at this size;
  // all three recalls refer to that same crop.
  double joint_recall_xy = 0.0;
  double joint_recall_z = 0.0;
  double recall_volume = 0.0;
  std::size_t n_items = 0;
  std::size_t n_joint_xy = 0;
  std::size_t n_joint_z = 0;
  std::size_t n_volume = 0;

  bool bound_satisfied() const { return n_volume + n_items >= n_joint_xy + n_joint_z; }
};

using ObjectFilter = std::function<bool(const ObjectSample&)>;

/// Recall of the best available candidate, searched separately per axis:
/// for each item the planar recall uses the candidate maximising IoI_xy at
/// that side, the vertical recall the one maximising IoI_z at that height.
/// Items whose frustum holds no points count as misses. The joint columns
/// use a single crop per item and so obey the volumetric lower bound.
inline std::vector<CurveRow> recall_curves(std::span<const Frame> frames,
                                           const SizeSearchConfig& cfg, CenterMode mode,
                                           const ObjectFilter& filter = {}) {
  cfg.validate();
  struct Item {
    const Frame* frame;
    const ObjectSample* object;
  };
  std::vector<Item> items;
  for (const auto& f : frames) {
    for (const auto& o : f.objects) {
      if (!filter || filter(o)) items.push_back({&f, &o});
    }
  }
  require(!items.empty(), "recall_curves: empty dataset", ErrorCode::empty_input);

  const auto& sides = cfg.side_candidates;
  const auto& heights = cfg.height_candidates;
  std::vector<CurveRow> rows;
  for (const auto& sub : cfg.subdivisions) {
    // best_xy[i][s], best_z[i][h]
    std::vector<std::vector<double>> best_xy(items.size(), std::vector<double>(sides.size(), 0.0));
    std::vector<std::vector<double>> best_z(items.size(), std::vector<double>(heights.size(), 0.0));
    // joint[i][s * H + h]: bit 0 xy positive, bit 1 z positive, bit 2 volume positive
    std::vector<std::vector<std::uint8_t>> joint(
        items.size(), std::vector<std::uint8_t>(sides.size() * heights.size(), 0));
    parallel_for(
        items.size(),
        [&](std::size_t i) {
          const Frame& f = *items[i].frame;
          const ObjectSample& o = *items[i].object;
          std::vector<Point3> cands;
          try {
            cands = candidate_centers(f.cloud, o.rect, f.intrinsics, f.pose, sub.rows, sub.cols,
                                      mode, cfg.range);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::no_candidates) throw;
            return;
          }
          std::vector<std::vector<double>> xy(cands.size()), z(cands.size());
          for (std::size_t c = 0; c < cands.size(); ++c) {
            for (std::size_t s = 0; s < sides.size(); ++s) {
              xy[c].push_back(ioi(o.box, Aabb3(cands[c], sides[s], heights.front())).ioi_xy);
              best_xy[i][s] = std::max(best_xy[i][s], xy[c][s]);
            }
            for (std::size_t h = 0; h < heights.size(); ++h) {
              z[c].push_back(ioi(o.box, Aabb3(cands[c], sides.front(), heights[h])).ioi_z);
              best_z[i][h] = std::max(best_z[i][h], z[c][h]);
            }
          }
          for (std::size_t s = 0; s < sides.size(); ++s) {
            for (std::size_t h = 0; h < heights.size(); ++h) {
              std::size_t pick = 0;
              for (std::size_t c = 1; c < cands.size(); ++c) {
                if (xy[c][s] * z[c][h] > xy[pick][s] * z[pick][h]) pick = c;
              }
              const double a = xy[pick][s], b = z[pick][h];
              joint[i][s * heights.size() + h] =
                  static_cast<std::uint8_t>((a >= cfg.threshold_xy ? 1 : 0) | (b >= cfg.threshold_z ? 2 : 0) |
                                            (a * b >= cfg.threshold_xy * cfg.threshold_z ? 4 : 0));
            }
          }
        },
        cfg.threads);

    const double n = static_cast<double>(items.size());
    std::vector<double> rxy(sides.size()), rz(heights.size());
    for (std::size_t s = 0; s < sides.size(); ++s) {
      std::size_t pos = 0;
      for (const auto& b : best_xy) pos += b[s] >= cfg.threshold_xy;
      rxy[s] = static_cast<double>(pos) / n;
    }
    for (std::size_t h = 0; h < heights.size(); ++h) {
      std::size_t pos = 0;
      for (const auto& b : best_z) pos += b[h] >= cfg.threshold_z;
      rz[h] = static_cast<double>(pos) / n;
    }
    for (std::size_t s = 0; s < sides.size(); ++s) {
      for (std::size_t h = 0; h < heights.size(); ++h) {
        std::size_t jxy = 0, jz = 0, jv = 0;
        for (const auto& j : joint) {
          const auto bits = j[s * heights.size() + h];
          jxy += (bits & 1) != 0;
          jz += (bits & 2) != 0;
          jv += (bits & 4) != 0;
        }
        rows.push_back({sub, mode, sides[s], heights[h], rxy[s], rz[h], static_cast<double>(jxy) / n,
                        static_cast<double>(jz) / n, static_cast<double>(jv) / n, items.size(), jxy,
                        jz, jv});
      }
    }
  }
  return rows;
}

inline void write_curves_csv(std::ostream& os, std::span<const CurveRow> rows) {
  os << "fr,fc,mode,side_m,height_m,recall_xy,recall_z,joint_recall_xy,joint_recall_z,recall_volume\n";
  auto old = os.precision(10);
  for (const auto& r : rows) {
    os << r.subdivision.rows << ',' << r.subdivision.cols << ',' << to_string(r.mode) << ','
       << r.side << ',' << r.height << ',' << r.recall_xy << ',' << r.recall_z << ','
       << r.joint_recall_xy << ',' << r.joint_recall_z << ',' << r.recall_volume << '\n';
  }
  os.precision(old);
}

inline std::vector<CurveRow> filter_curves(std::span<const CurveRow> rows,
                                           SubdivisionConfig sub, CenterMode mode) {
  std::vector<CurveRow> out;
  for (const auto& r : rows) {
    if (r.subdivision == sub && r.mode == mode) out.push_back(r);
  }
  return out;
}

struct SizeSelection {
  double side = 0.0;
  double height = 0.0;
  double recall_xy = 0.0;
  double recall_z = 0.0;
  // Volumetric recall guaranteed by the targets alone.
  double guaranteed_volume_recall = 0.0;
  // Bound implied by the recalls actually reached at the chosen sizes.
  double achieved_volume_bound = 0.0;
};

/// Smallest side whose planar recall meets `target_xy` and smallest height
/// whose vertical recall meets `target_z`, searched independently. When a
/// side appears at several heights its weakest recall is used (and vice versa).
inline SizeSelection select_min_size(std::span<const CurveRow> rows, double target_xy = 0.90,
                                     double target_z = 0.95) {
  require(!rows.empty(), "select_min_size: no curve rows", ErrorCode::empty_input);
  require(target_xy > 0.0 && target_xy <= 1.0 && target_z > 0.0 && target_z <= 1.0,
          "select_min_size: targets must lie in (0, 1]");
  for (const auto& r : rows) {
    require(r.subdivision == rows.front().subdivision && r.mode == rows.front().mode,
            "select_min_size: rows mix several subdivision/mode configurations");
  }
  auto search = [&](auto key, auto value, double target) -> std::optional<std::pair<double, double>> {
    std::vector<std::pair<double, double>> weakest;  // (size, min recall)
    for (const auto& r : rows) {
      auto it = std::find_if(weakest.begin(), weakest.end(),
                             [&](const auto& w) { return w.first == key(r); });
      if (it == weakest.end()) {
        weakest.emplace_back(key(r), value(r));
      } else {
        it->second = std::min(it->second, value(r));
      }
    }
    std::sort(weakest.begin(), weakest.end());
    for (const auto& w : weakest) {
      if (w.second >= target) return w;
    }
    return std::nullopt;
  };
  const auto side = search([](const CurveRow& r) { return r.side; },
                           [](const CurveRow& r) { return r.recall_xy; }, target_xy);
  const auto height = search([](const CurveRow& r) { return r.height; },
                             [](const CurveRow& r) { return r.recall_z; }, target_z);
  if (!side) fail(ErrorCode::infeasible, "no crop side reaches the planar recall target");
  if (!height) fail(ErrorCode::infeasible, "no crop height reaches the vertical recall target");
  SizeSelection sel;
  sel.side = side->first;
  sel.recall_xy = side->second;
  sel.height = height->first;
  sel.recall_z = height->second;
  sel.guaranteed_volume_recall = recall_volume_lower_bound(target_xy, target_z);
  sel.achieved_volume_bound = recall_volume_lower_bound(sel.recall_xy, sel.recall_z);
  return sel;
}

// ---------------------------------------------------------------------------
// Double frustum

enum class Phase { train, inference };

struct DoubleFrustumRects {
  Rect2 center_rect;  // drives the crop center
  Rect2 large_rect;   // bounds the points that get voxelized
};

inline constexpr double kTrainMaxGrow = 0.15;
inline constexpr double kTrainMaxShrink = 0.10;
inline constexpr double kInferenceGrow = 0.05;

/// Training enlarges width and height by independent U[0, 15%] draws and
/// shrinks the center rect by independent U[0, 10%] draws; inference
/// enlarges by 5% and keeps the original rect for the center. All scaling is
/// about the rect center.
inline DoubleFrustumRects double_frustum(const Rect2& rect, Phase phase, std::uint64_t seed) {
  if (phase == Phase::inference) {
    return {rect, rect.scaled(1.0 + kInferenceGrow, 1.0 + kInferenceGrow)};
  }
  Rng rng(seed);
  const double grow_u = 1.0 + kTrainMaxGrow * rng.uniform();
  const double grow_v = 1.0 + kTrainMaxGrow * rng.uniform();
  const double shrink_u = 1.0 - kTrainMaxShrink * rng.uniform();
  const double shrink_v = 1.0 - kTrainMaxShrink * rng.uniform();
  return {rect.scaled(shrink_u, shrink_v), rect.scaled(grow_u, grow_v)};
}

/// A crop proposal for one detection: center from the center rect's frustum,
/// contents from the large rect's frustum clipped to the crop.
struct CropProposal {
  Aabb3 crop;
  DoubleFrustumRects rects;
  PointCloud points;
};

inline CropProposal propose_crop(std::span<const Point3> cloud, const Rect2& rect,
                                 const CameraIntrinsics& k, const Pose& pose,
                                 const ScaleSpec& spec, Phase phase, std::uint64_t seed,
                                 DepthRange range = {}) {
  const auto rects = double_frustum(rect, phase, seed);
  const Point3 center = frustum_center(cloud, Frustum(rects.center_rect, k, pose, range),
                                       CenterMode::average);
  const Aabb3 crop = spec.crop_at(center);
  const Frustum large(rects.large_rect, k, pose, range);
  PointCloud pts;
  for (const auto& p : cloud) {
    if (crop.contains(p) && large.contains(p)) pts.push_back(p);
  }
  return {crop, rects, std::move(pts)};
}

}  // namespace fvx
