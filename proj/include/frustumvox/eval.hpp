#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "frustumvox/dataset.hpp"
#include "frustumvox/error.hpp"
#include "frustumvox/frustum.hpp"
#include "frustumvox/ioi.hpp"

namespace fvx {

struct Detection {
  OrientedBox3 box;
  std::string category;
  double score = 0.0;
};

inline constexpr double kDefaultIouThreshold = 0.25;

struct MatchPair {
  std::size_t detection = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<std::size_t> order;  // detection indices by descending score
  std::vector<bool> tp;            // per detection, input order
  std::vector<MatchPair> pairs;
};

/// Indices sorted by descending score; equal scores keep input order.
inline std::vector<std::size_t> score_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

/// Greedy matching: in score order each detection takes the unmatched
/// ground truth with the highest IoU at or above the threshold (lowest
/// index on ties). All inputs are assumed to share one category.
inline MatchResult match(std::span<const Detection> dets, std::span<const OrientedBox3> gts,
                         double iou_thresh = kDefaultIouThreshold) {
  std::vector<double> scores;
  scores.reserve(dets.size());
  for (const auto& d : dets) {
    require(std::isfinite(d.score), "match: non-finite detection score");
    scores.push_back(d.score);
  }
  MatchResult r;
  r.order = score_order(scores);
  r.tp.assign(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t di : r.order) {
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou_3d(dets[di].box, gts[g]);
      if (v >= iou_thresh && v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best) {
      taken[*best] = true;
      r.tp[di] = true;
      r.pairs.push_back({di, *best, best_iou});
    }
  }
  return r;
}

struct ScoredFlag {
  double score = 0.0;
  bool tp = false;
};

/// All-point interpolated AP: the area under the precision envelope, where
/// precision at each recall level is the best precision at that recall or
/// beyond. With no ground truth the AP is 0.
inline double average_precision(std::span<const ScoredFlag> flags, std::size_t n_gt) {
  if (n_gt == 0) return 0.0;
  std::vector<double> scores;
  for (const auto& f : flags) scores.push_back(f.score);
  const auto order = score_order(scores);
  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    tp += flags[order[k]].tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }
  for (std::size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return std::clamp(ap, 0.0, 1.0);
}

struct MetricsRow {
  double d_x = 0.0, d_y = 0.0, d_z = 0.0, d_xyz = 0.0;
  double d_w = 0.0, d_d = 0.0, d_h = 0.0, d_wdh = 0.0;
  double orientation_score = 1.0;  // |cos(yaw_pred - yaw_gt)|
};

inline MetricsRow center_size_metrics(const OrientedBox3& pred, const OrientedBox3& gt) {
  MetricsRow m;
  const Point3 dc = pred.center() - gt.center();
  m.d_x = std::abs(dc.x);
  m.d_y = std::abs(dc.y);
  m.d_z = std::abs(dc.z);
  m.d_xyz = norm(dc);
  const double dw = pred.width() - gt.width();
  const double dd = pred.depth() - gt.depth();
  const double dh = pred.height() - gt.height();
  m.d_w = std::abs(dw);
  m.d_d = std::abs(dd);
  m.d_h = std::abs(dh);
  m.d_wdh = std::sqrt(dw * dw + dd * dd + dh * dh);
  m.orientation_score = std::min(1.0, std::abs(std::cos(pred.yaw() - gt.yaw())));
  return m;
}

inline MetricsRow mean_metrics(std::span<const MetricsRow> rows) {
  MetricsRow m{};
  m.orientation_score = 0.0;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.d_x += r.d_x; m.d_y += r.d_y; m.d_z += r.d_z; m.d_xyz += r.d_xyz;
    m.d_w += r.d_w; m.d_d += r.d_d; m.d_h += r.d_h; m.d_wdh += r.d_wdh;
    m.orientation_score += r.orientation_score;
  }
  const double n = static_cast<double>(rows.size());
  for (double* v : {&m.d_x, &m.d_y, &m.d_z, &m.d_xyz, &m.d_w, &m.d_d, &m.d_h, &m.d_wdh,
                    &m.orientation_score}) {
    *v /= n;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Center source comparison

struct CenterErrorSummary {
  std::size_t count = 0;
  Point3 mean_signed;  // mean of (estimate - gt) per coordinate
  double mean_d_xyz = 0.0;
};

struct CenterComparisonRow {
  std::string category;
  CenterErrorSummary frustum_average;
  std::optional<CenterErrorSummary> predicted;
};

struct CenterComparisonItem {
  std::string category;
  OrientedBox3 gt;
  const PointCloud* cloud = nullptr;
  Rect2 rect;
  CameraIntrinsics intrinsics;
  Pose pose;
  std::optional<Point3> predicted_center;
};

/// Per category: mean signed and Euclidean center error of the frustum
/// average center and, where supplied, of a predicted center. Items whose
/// frustum holds no points are skipped for the frustum column.
inline std::vector<CenterComparisonRow> center_baseline_compare(
    std::span<const CenterComparisonItem> items, DepthRange range = {}) {
  require(!items.empty(), "center comparison: empty dataset", ErrorCode::empty_input);
  struct Acc {
    std::size_t n = 0;
    Point3 sum;
    double dsum = 0.0;
    void add(const Point3& est, const Point3& gt) {
      const Point3 e = est - gt;
      ++n;
      sum = sum + e;
      dsum += norm(e);
    }
    CenterErrorSummary summary() const {
      const double k = static_cast<double>(n);
      return {n, (1.0 / k) * sum, dsum / k};
    }
  };
  std::map<std::string, std::pair<Acc, Acc>> by_cat;
  for (const auto& it : items) {
    require(it.cloud != nullptr, "center comparison: item without a cloud");
    auto& [frustum_acc, pred_acc] = by_cat[it.category];
    const Frustum f(it.rect, it.intrinsics, it.pose, range);
    const PointCloud inside = crop_to_frustum(*it.cloud, f);
    if (!inside.empty()) frustum_acc.add(point_center(inside, CenterMode::average), it.gt.center());
    if (it.predicted_center) pred_acc.add(*it.predicted_center, it.gt.center());
  }
  std::vector<CenterComparisonRow> rows;
  for (const auto& [cat, accs] : by_cat) {
    CenterComparisonRow row;
    row.category = cat;
    if (accs.first.n > 0) row.frustum_average = accs.first.summary();
    if (accs.second.n > 0) row.predicted = accs.second.summary();
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Histograms

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  Histogram(double lo_, double hi_, std::size_t bins) : lo(lo_), hi(hi_), counts(bins, 0) {
    require(bins > 0 && hi_ > lo_, "histogram: need bins > 0 and hi > lo");
  }

  void add(double v) {
    const auto n = counts.size();
    auto b = static_cast<long>(std::floor((v - lo) / (hi - lo) * static_cast<double>(n)));
    b = std::clamp<long>(b, 0, static_cast<long>(n) - 1);
    ++counts[static_cast<std::size_t>(b)];
  }

  double bin_lo(std::size_t i) const { return lo + (hi - lo) * i / counts.size(); }
  double bin_hi(std::size_t i) const { return lo + (hi - lo) * (i + 1) / counts.size(); }
};

// ---------------------------------------------------------------------------
// Per-category evaluation

struct CategoryEvaluation {
  std::string category;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  std::size_t n_tp = 0;
  double ap = 0.0;
  double recall = 0.0;
  MetricsRow mean;  // over matched pairs
  Histogram iou_hist{0.0, 1.0, 10};
  Histogram orientation_hist{0.0, 1.0, 10};
};

struct FrameDetections {
  std::vector<OrientedBox3> gts;
  std::vector<std::string> gt_categories;
  std::vector<Detection> detections;
};

/// Matches per frame and category, pools flags across frames, then reports
/// AP, recall, mean metrics over true positives and IoU/orientation histograms.
inline std::vector<CategoryEvaluation> evaluate(std::span<const FrameDetections> frames,
                                                double iou_thresh = kDefaultIouThreshold,
                                                std::size_t bins = 10) {
  struct Pool {
    std::vector<ScoredFlag> flags;
    std::vector<MetricsRow> metrics;
    std::vector<double> ious;
    std::size_t n_gt = 0;
  };
  std::map<std::string, Pool> pools;
  for (const auto& fr : frames) {
    require(fr.gts.size() == fr.gt_categories.size(), "evaluate: gt/category size mismatch");
    std::map<std::string, std::pair<std::vector<OrientedBox3>, std::vector<Detection>>> split;
    for (std::size_t i = 0; i < fr.gts.size(); ++i) split[fr.gt_categories[i]].first.push_back(fr.gts[i]);
    for (const auto& d : fr.detections) split[d.category].second.push_back(d);
    for (const auto& [cat, gd] : split) {
      const auto& [gts, dets] = gd;
      auto& pool = pools[cat];
      pool.n_gt += gts.size();
      const auto m = match(dets, gts, iou_thresh);
      for (std::size_t i = 0; i < dets.size(); ++i) pool.flags.push_back({dets[i].score, m.tp[i]});
      for (const auto& p : m.pairs) {
        pool.metrics.push_back(center_size_metrics(dets[p.detection].box, gts[p.gt]));
        pool.ious.push_back(p.iou);
      }
    }
  }
  std::vector<CategoryEvaluation> out;
  for (const auto& [cat, pool] : pools) {
    CategoryEvaluation e;
    e.category = cat;
    e.iou_hist = Histogram(0.0, 1.0, bins);
    e.orientation_hist = Histogram(0.0, 1.0, bins);
    e.n_gt = pool.n_gt;
    e.n_det = pool.flags.size();
    e.n_tp = pool.metrics.size();
    e.ap = average_precision(pool.flags, pool.n_gt);
    e.recall = pool.n_gt ? static_cast<double>(e.n_tp) / static_cast<double>(pool.n_gt) : 0.0;
    e.mean = mean_metrics(pool.metrics);
    for (double v : pool.ious) e.iou_hist.add(v);
    for (const auto& m : pool.metrics) e.orientation_hist.add(m.orientation_score);
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_evaluation_csv(std::ostream& os, std::span<const CategoryEvaluation> rows) {
  os << "category,n_gt,n_det,n_tp,ap,recall,d_x,d_y,d_z,d_xyz,d_w,d_d,d_h,d_wdh,orientation_score\n";
  auto old = os.precision(10);
  for (const auto& e : rows) {
    const auto& m = e.mean;
    os << e.category << ',' << e.n_gt << ',' << e.n_det << ',' << e.n_tp << ',' << e.ap << ','
       << e.recall << ',' << m.d_x << ',' << m.d_y << ',' << m.d_z << ',' << m.d_xyz << ','
       << m.d_w << ',' << m.d_d << ',' << m.d_h << ',' << m.d_wdh << ',' << m.orientation_score
       << '\n';
  }
  os.precision(old);
}

/// Long-format histogram CSV: category,bin_lo,bin_hi,count.
inline void write_histogram_csv(std::ostream& os, std::span<const CategoryEvaluation> rows,
                                bool orientation) {
  os << "category,bin_lo,bin_hi,count\n";
  for (const auto& e : rows) {
    const Histogram& h = orientation ? e.orientation_hist : e.iou_hist;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      os << e.category << ',' << h.bin_lo(i) << ',' << h.bin_hi(i) << ',' << h.counts[i] << '\n';
    }
  }
}

inline void write_center_comparison_csv(std::ostream& os,
                                        std::span<const CenterComparisonRow> rows) {
  os << "category,source,count,mean_dx,mean_dy,mean_dz,mean_d_xyz\n";
  auto old = os.precision(10);
  auto line = [&](const std::string& cat, const char* src, const CenterErrorSummary& s) {
    os << cat << ',' << src << ',' << s.count << ',' << s.mean_signed.x << ',' << s.mean_signed.y
       << ',' << s.mean_signed.z << ',' << s.mean_d_xyz << '\n';
  };
  for (const auto& r : rows) {
    line(r.category, "frustum_average", r.frustum_average);
    if (r.predicted) line(r.category, "predicted", *r.predicted);
  }
  os.precision(old);
}

}  // namespace fvx
