#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "frustumvox/error.hpp"
#include "frustumvox/geometry.hpp"

namespace fvx {

/// Per-category mean box size used as the reference for size regression.
struct Anchor {
  std::string category;
  double a_w = 0.0;
  double a_d = 0.0;
  double a_h = 0.0;
};

using AnchorTable = std::map<std::string, Anchor>;

inline AnchorTable compute_anchors(const std::map<std::string, std::vector<OrientedBox3>>& boxes) {
  AnchorTable out;
  for (const auto& [cat, list] : boxes) {
    require(!list.empty(), "anchors: category '" + cat + "' has no boxes", ErrorCode::empty_input);
    double w = 0.0, d = 0.0, h = 0.0;
    for (const auto& b : list) {
      w += b.width();
      d += b.depth();
      h += b.height();
    }
    const double n = static_cast<double>(list.size());
    out[cat] = {cat, w / n, d / n, h / n};
  }
  return out;
}

inline void write_anchors_csv(std::ostream& os, const AnchorTable& anchors) {
  os << "category,a_w,a_d,a_h\n";
  auto old = os.precision(17);
  for (const auto& [cat, a] : anchors) {
    os << cat << ',' << a.a_w << ',' << a.a_d << ',' << a.a_h << '\n';
  }
  os.precision(old);
}

inline AnchorTable read_anchors_csv(std::istream& is) {
  AnchorTable out;
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      require(line == "category,a_w,a_d,a_h", "anchors: unexpected header", ErrorCode::format);
      header = false;
      continue;
    }
    std::istringstream ls(line);
    Anchor a;
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    require(fields.size() == 4, "anchors: bad line " + std::to_string(lineno), ErrorCode::format);
    try {
      a = {fields[0], std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3])};
    } catch (const std::exception&) {
      fail(ErrorCode::format, "anchors: bad number on line " + std::to_string(lineno));
    }
    require(a.a_w > 0.0 && a.a_d > 0.0 && a.a_h > 0.0,
            "anchors: non-positive size on line " + std::to_string(lineno), ErrorCode::format);
    out[a.category] = a;
  }
  return out;
}

/// Regression target relative to a crop and an anchor: heading as a unit
/// vector, center normalized into the crop, sizes as log ratios to the anchor.
struct HeadVector {
  static constexpr std::size_t kSize = 8;

  double ox = 1.0, oy = 0.0;
  double tx = 0.5, ty = 0.5, tz = 0.5;
  double lw = 0.0, ld = 0.0, lh = 0.0;

  std::array<double, kSize> to_array() const { return {ox, oy, tx, ty, tz, lw, ld, lh}; }
  static HeadVector from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]};
  }
};

inline HeadVector encode(const OrientedBox3& gt, const Aabb3& crop, const Anchor& anchor) {
  require(crop.contains(gt.center()), "encode: box center lies outside the crop",
          ErrorCode::encode_domain);
  const Point3 lo = crop.min();
  HeadVector v;
  v.ox = std::cos(gt.yaw());
  v.oy = std::sin(gt.yaw());
  v.tx = (gt.center().x - lo.x) / crop.side();
  v.ty = (gt.center().y - lo.y) / crop.side();
  v.tz = (gt.center().z - lo.z) / crop.height();
  v.lw = std::log(gt.width() / anchor.a_w);
  v.ld = std::log(gt.depth() / anchor.a_d);
  v.lh = std::log(gt.height() / anchor.a_h);
  return v;
}

inline OrientedBox3 decode(const HeadVector& v, const Aabb3& crop, const Anchor& anchor) {
  require(std::hypot(v.ox, v.oy) > 0.0, "decode: zero orientation vector");
  const Point3 lo = crop.min();
  return OrientedBox3({lo.x + v.tx * crop.side(), lo.y + v.ty * crop.side(),
                       lo.z + v.tz * crop.height()},
                      anchor.a_w * std::exp(v.lw), anchor.a_d * std::exp(v.ld),
                      anchor.a_h * std::exp(v.lh), std::atan2(v.oy, v.ox));
}

struct LossWeights {
  double orientation = 1.0;  // lambda1
  double xyz = 1.0;          // lambda2
  double wdh = 1.0;          // lambda3
  double category = 0.0;     // lambda0, optional class-probability term

  void validate() const {
    require(orientation >= 0.0 && xyz >= 0.0 && wdh >= 0.0 && category >= 0.0,
            "loss: weights must be non-negative");
    require(orientation + xyz + wdh + category > 0.0, "loss: all weights are zero");
  }
};

struct LossTerms {
  double total = 0.0;
  double orientation = 0.0;
  double xyz = 0.0;
  double wdh = 0.0;
  double category = 0.0;
};

inline double squared(double x) { return x * x; }

/// Weighted sum of squared differences. The orientation term is the squared
/// distance between heading vectors; the optional category term is the L2
/// distance between class-probability vectors.
inline LossTerms loss(const HeadVector& pred, const HeadVector& target, const LossWeights& w,
                      std::span<const double> pred_probs = {},
                      std::span<const double> target_probs = {}) {
  w.validate();
  require(pred_probs.size() == target_probs.size(), "loss: probability vectors differ in length");
  LossTerms t;
  t.orientation = squared(pred.ox - target.ox) + squared(pred.oy - target.oy);
  t.xyz = squared(pred.tx - target.tx) + squared(pred.ty - target.ty) + squared(pred.tz - target.tz);
  t.wdh = squared(pred.lw - target.lw) + squared(pred.ld - target.ld) + squared(pred.lh - target.lh);
  for (std::size_t i = 0; i < pred_probs.size(); ++i) {
    t.category += squared(pred_probs[i] - target_probs[i]);
  }
  t.total = w.orientation * t.orientation + w.xyz * t.xyz + w.wdh * t.wdh + w.category * t.category;
  return t;
}

/// d(total)/d(pred) for each of the eight head components.
inline std::array<double, HeadVector::kSize> loss_grad(const HeadVector& pred,
                                                       const HeadVector& target,
                                                       const LossWeights& w) {
  w.validate();
  const auto p = pred.to_array();
  const auto q = target.to_array();
  const double lambda[HeadVector::kSize] = {w.orientation, w.orientation, w.xyz, w.xyz,
                                            w.xyz,         w.wdh,         w.wdh, w.wdh};
  std::array<double, HeadVector::kSize> g{};
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * lambda[i] * (p[i] - q[i]);
  return g;
}

// Relative errors are measured against max(|analytic| + |numeric|, floor) so
// components whose true gradient is ~0 are judged on an absolute scale.
inline constexpr double kGradCheckFloor = 1e-6;

/// Largest relative error between the analytic gradient and central differences.
inline double fd_check(const HeadVector& pred, const HeadVector& target, const LossWeights& w,
                       double eps = 1e-5) {
  require(eps >= 1e-8 && eps <= 1e-3, "fd_check: eps must lie in [1e-8, 1e-3]");
  const auto analytic = loss_grad(pred, target, w);
  const auto base = pred.to_array();
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto plus = base, minus = base;
    plus[i] += eps;
    minus[i] -= eps;
    const double fp = loss(HeadVector::from_array(plus), target, w).total;
    const double fm = loss(HeadVector::from_array(minus), target, w).total;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), kGradCheckFloor);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace fvx
