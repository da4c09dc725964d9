#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <utility>

#include "frustumvox/error.hpp"
#include "frustumvox/geometry.hpp"
#include "frustumvox/ioi.hpp"

namespace fvx {

/// max(0, recall_xy + recall_z - 1): the guaranteed volumetric recall given
/// per-axis recalls.
inline double recall_volume_lower_bound(double recall_xy, double recall_z) {
  return std::max(0.0, recall_xy + recall_z - 1.0);
}

struct RecallReport {
  double threshold_xy = 0.0;
  double threshold_z = 0.0;
  std::size_t n_total = 0;
  std::size_t n_pos_volume = 0;
  std::size_t n_pos_xy = 0;
  std::size_t n_pos_z = 0;
  double recall_volume = 0.0;
  double recall_xy = 0.0;
  double recall_z = 0.0;

  double threshold_3d() const { return threshold_xy * threshold_z; }
  double lower_bound() const { return recall_volume_lower_bound(recall_xy, recall_z); }
  // Compared on counts when available so rounding cannot fake a violation.
  bool bound_satisfied() const {
    if (n_total > 0) return n_pos_volume + n_total >= n_pos_xy + n_pos_z;
    return recall_volume >= lower_bound();
  }
};

/// Accumulates positives from precomputed IoI values. A crop is positive in
/// 3D when ioi_xy * ioi_z >= threshold_xy * threshold_z.
class RecallAccumulator {
 public:
  RecallAccumulator(double threshold_xy, double threshold_z) {
    require(threshold_xy > 0.0 && threshold_xy <= 1.0 && threshold_z > 0.0 && threshold_z <= 1.0,
            "recall: thresholds must lie in (0, 1]");
    report_.threshold_xy = threshold_xy;
    report_.threshold_z = threshold_z;
  }

  void add(const IoiBreakdown& v) {
    ++report_.n_total;
    if (v.ioi_xy >= report_.threshold_xy) ++report_.n_pos_xy;
    if (v.ioi_z >= report_.threshold_z) ++report_.n_pos_z;
    if (v.ioi_xy * v.ioi_z >= report_.threshold_3d()) ++report_.n_pos_volume;
  }

  /// Finalizes ratios and checks the per-axis lower bound on volumetric recall.
  RecallReport finish() const {
    require(report_.n_total > 0, "recall: empty pair list", ErrorCode::empty_input);
    RecallReport r = report_;
    const double n = static_cast<double>(r.n_total);
    r.recall_volume = static_cast<double>(r.n_pos_volume) / n;
    r.recall_xy = static_cast<double>(r.n_pos_xy) / n;
    r.recall_z = static_cast<double>(r.n_pos_z) / n;
    if (!r.bound_satisfied()) {
      fail(ErrorCode::invariant_violation,
           "recall: volumetric recall " + std::to_string(r.recall_volume) +
               " below per-axis bound " + std::to_string(r.lower_bound()));
    }
    return r;
  }

 private:
  RecallReport report_;
};

inline RecallReport recall_report(std::span<const std::pair<OrientedBox3, Aabb3>> pairs,
                                  double threshold_xy, double threshold_z) {
  require(!pairs.empty(), "recall: empty pair list", ErrorCode::empty_input);
  RecallAccumulator acc(threshold_xy, threshold_z);
  for (const auto& [box, crop] : pairs) acc.add(ioi(box, crop));
  return acc.finish();
}

inline void write_recall_csv_header(std::ostream& os) {
  os << "threshold_xy,threshold_z,threshold_3d,n_total,n_pos_volume,n_pos_xy,n_pos_z,"
        "recall_volume,recall_xy,recall_z,lower_bound,bound_satisfied\n";
}

inline void write_recall_csv_row(std::ostream& os, const RecallReport& r) {
  os << r.threshold_xy << ',' << r.threshold_z << ',' << r.threshold_3d() << ',' << r.n_total
     << ',' << r.n_pos_volume << ',' << r.n_pos_xy << ',' << r.n_pos_z << ','
     << r.recall_volume << ',' << r.recall_xy << ',' << r.recall_z << ',' << r.lower_bound()
     << ',' << (r.bound_satisfied() ? 1 : 0) << '\n';
}

}  // namespace fvx
