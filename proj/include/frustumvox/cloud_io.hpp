#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "frustumvox/binary_io.hpp"
#include "frustumvox/error.hpp"
#include "frustumvox/geometry.hpp"

namespace fvx {

// Binary layout: uint64 LE point count, then count * (x, y, z) float32 LE.

inline void write_cloud_binary(std::ostream& os, const PointCloud& cloud) {
  io::put_le<std::uint64_t>(os, cloud.size());
  for (const auto& p : cloud) {
    io::put_f32(os, static_cast<float>(p.x));
    io::put_f32(os, static_cast<float>(p.y));
    io::put_f32(os, static_cast<float>(p.z));
  }
}

inline PointCloud read_cloud_binary(std::istream& is) {
  const auto n = io::get_le<std::uint64_t>(is);
  PointCloud cloud;
  cloud.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) {
    Point3 p;
    p.x = io::get_f32(is);
    p.y = io::get_f32(is);
    p.z = io::get_f32(is);
    require(is_finite(p), "point cloud: non-finite coordinate", ErrorCode::format);
    cloud.push_back(p);
  }
  return cloud;
}

/// One "x y z" triple per line; blank lines and '#' comments are skipped.
inline PointCloud read_cloud_text(std::istream& is) {
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Point3 p;
    std::string extra;
    if (!(ls >> p.x >> p.y >> p.z) || (ls >> extra) || !is_finite(p)) {
      fail(ErrorCode::format, "point cloud: bad line " + std::to_string(lineno));
    }
    cloud.push_back(p);
  }
  return cloud;
}

inline void write_cloud_text(std::ostream& os, const PointCloud& cloud) {
  auto old = os.precision(17);
  for (const auto& p : cloud) os << p.x << ' ' << p.y << ' ' << p.z << '\n';
  os.precision(old);
}

/// Picks the text reader for .txt/.xyz files and the binary one otherwise.
inline PointCloud load_cloud(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".txt" || ext == ".xyz") {
    auto is = io::open_in(path, false);
    return read_cloud_text(is);
  }
  auto is = io::open_in(path);
  return read_cloud_binary(is);
}

inline void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  const auto ext = path.extension().string();
  if (ext == ".txt" || ext == ".xyz") {
    auto os = io::open_out(path, false);
    write_cloud_text(os, cloud);
    return;
  }
  auto os = io::open_out(path);
  write_cloud_binary(os, cloud);
}

}  // namespace fvx
