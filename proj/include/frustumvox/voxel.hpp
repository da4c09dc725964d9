#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "frustumvox/binary_io.hpp"
#include "frustumvox/error.hpp"
#include "frustumvox/geometry.hpp"
#include "frustumvox/rng.hpp"
#include "frustumvox/scale.hpp"

namespace fvx {

/// Per-cell point counts over a crop. Cells are stored with x as the
/// slowest index, then y, then z.
class VoxelGrid {
 public:
  VoxelGrid(GridShape dims, Point3 cell, Point3 origin)
      : dims_(dims), cell_(cell), origin_(origin) {
    require(dims.w > 0 && dims.d > 0 && dims.h > 0, "voxel grid: dimensions must be positive");
    require(cell.x > 0.0 && cell.y > 0.0 && cell.z > 0.0, "voxel grid: cell size must be positive");
    data_.assign(static_cast<std::size_t>(dims.w) * dims.d * dims.h, 0u);
  }

  const GridShape& dims() const { return dims_; }
  const Point3& cell() const { return cell_; }
  const Point3& origin() const { return origin_; }
  std::span<const std::uint32_t> data() const { return data_; }
  std::span<std::uint32_t> data() { return data_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * dims_.d + iy) * dims_.h + iz;
  }
  std::uint32_t at(int ix, int iy, int iz) const { return data_[index(ix, iy, iz)]; }
  std::uint32_t& at(int ix, int iy, int iz) { return data_[index(ix, iy, iz)]; }

  /// Lower face coordinate of cell k along an axis (0 = x, 1 = y, 2 = z).
  /// Grid line k sits at origin + k * cell on that axis.
  double grid_line(int axis, int k) const {
    switch (axis) {
      case 0: return origin_.x + k * cell_.x;
      case 1: return origin_.y + k * cell_.y;
      default: return origin_.z + k * cell_.z;
    }
  }

  std::uint64_t total() const {
    return std::accumulate(data_.begin(), data_.end(), std::uint64_t{0});
  }

  friend bool operator==(const VoxelGrid& a, const VoxelGrid& b) {
    return a.dims_ == b.dims_ && a.cell_ == b.cell_ && a.origin_ == b.origin_ &&
           a.data_ == b.data_;
  }

 private:
  GridShape dims_;
  Point3 cell_;
  Point3 origin_;
  std::vector<std::uint32_t> data_;
};

namespace detail {

// Cell index of coordinate `p` along an axis whose line k is at
// lo + k * cell. Points on a shared face go to the higher cell; the far
// crop face belongs to the last cell.
inline int cell_index(double p, double lo, double cell, int n) {
  int i = static_cast<int>(std::floor((p - lo) / cell));
  i = std::clamp(i, 0, n - 1);
  if (i + 1 < n && p >= lo + (i + 1) * cell) ++i;
  if (i > 0 && p < lo + i * cell) --i;
  return i;
}

}  // namespace detail

inline VoxelGrid make_grid(const Aabb3& crop, GridShape dims) {
  return VoxelGrid(dims,
                   {crop.side() / dims.w, crop.side() / dims.d, crop.height() / dims.h},
                   crop.min());
}

/// Counts the points inside the closed crop, one cell per point.
inline VoxelGrid voxelize(std::span<const Point3> cloud, const Aabb3& crop, GridShape dims) {
  VoxelGrid grid = make_grid(crop, dims);
  const Point3 lo = crop.min();
  const Point3 cell = grid.cell();
  for (const auto& p : cloud) {
    if (!crop.contains(p)) continue;
    const int ix = detail::cell_index(p.x, lo.x, cell.x, dims.w);
    const int iy = detail::cell_index(p.y, lo.y, cell.y, dims.d);
    const int iz = detail::cell_index(p.z, lo.z, cell.z, dims.h);
    ++grid.at(ix, iy, iz);
  }
  return grid;
}

inline VoxelGrid voxelize(std::span<const Point3> cloud, const Aabb3& crop,
                          const ScaleSpec& spec) {
  return voxelize(cloud, crop, spec.grid);
}

/// Rotates the cloud by `yaw` about the crop's vertical center axis.
inline PointCloud rotate_about_axis(std::span<const Point3> cloud, const Aabb3& crop,
                                    double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double ax = crop.center().x, ay = crop.center().y;
  PointCloud out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) {
    const double dx = p.x - ax, dy = p.y - ay;
    // Offsets added to p itself, so yaw 0 returns the input bit for bit.
    out.push_back({p.x + ((c - 1.0) * dx - s * dy), p.y + (s * dx + (c - 1.0) * dy), p.z});
  }
  return out;
}

inline constexpr double kDefaultJitterSigma = 0.01;

struct AugmentResult {
  PointCloud cloud;
  double yaw = 0.0;
};

/// Training augmentation: a uniform yaw in [-pi, pi) about the crop axis,
/// then i.i.d. Gaussian jitter on every coordinate.
inline AugmentResult augment(std::span<const Point3> cloud, const Aabb3& crop, std::uint64_t seed,
                             double jitter_sigma = kDefaultJitterSigma) {
  require(jitter_sigma >= 0.0, "augment: jitter sigma must be non-negative");
  Rng rng(seed);
  AugmentResult r;
  r.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
  r.cloud = rotate_about_axis(cloud, crop, r.yaw);
  if (jitter_sigma > 0.0) {
    for (auto& p : r.cloud) {
      p.x += rng.normal(0.0, jitter_sigma);
      p.y += rng.normal(0.0, jitter_sigma);
      p.z += rng.normal(0.0, jitter_sigma);
    }
  }
  return r;
}

// Binary layout: "FVGRID01", dims as 3 x uint32 LE, cell as 3 x float64 LE,
// origin as 3 x float64 LE, then W*D*H uint32 LE counts in storage order.
inline constexpr char kGridMagic[8] = {'F', 'V', 'G', 'R', 'I', 'D', '0', '1'};

inline void write_grid(std::ostream& os, const VoxelGrid& g) {
  os.write(kGridMagic, sizeof kGridMagic);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.dims().w));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.dims().d));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.dims().h));
  for (double v : {g.cell().x, g.cell().y, g.cell().z, g.origin().x, g.origin().y, g.origin().z}) {
    io::put_f64(os, v);
  }
  for (std::uint32_t c : g.data()) io::put_le<std::uint32_t>(os, c);
}

inline VoxelGrid read_grid(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  require(is && std::equal(magic, magic + 8, kGridMagic), "voxel grid: bad magic",
          ErrorCode::format);
  GridShape dims;
  dims.w = static_cast<int>(io::get_le<std::uint32_t>(is));
  dims.d = static_cast<int>(io::get_le<std::uint32_t>(is));
  dims.h = static_cast<int>(io::get_le<std::uint32_t>(is));
  Point3 cell, origin;
  cell.x = io::get_f64(is);
  cell.y = io::get_f64(is);
  cell.z = io::get_f64(is);
  origin.x = io::get_f64(is);
  origin.y = io::get_f64(is);
  origin.z = io::get_f64(is);
  VoxelGrid g(dims, cell, origin);
  for (auto& c : g.data()) c = io::get_le<std::uint32_t>(is);
  return g;
}

/// Nonzero cells as "ix,iy,iz,count" rows.
inline void write_grid_sparse_csv(std::ostream& os, const VoxelGrid& g) {
  os << "ix,iy,iz,count\n";
  for (int ix = 0; ix < g.dims().w; ++ix) {
    for (int iy = 0; iy < g.dims().d; ++iy) {
      for (int iz = 0; iz < g.dims().h; ++iz) {
        if (const auto c = g.at(ix, iy, iz); c != 0) {
          os << ix << ',' << iy << ',' << iz << ',' << c << '\n';
        }
      }
    }
  }
}

}  // namespace fvx
