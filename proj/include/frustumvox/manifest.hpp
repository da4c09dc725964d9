#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "frustumvox/cloud_io.hpp"
#include "frustumvox/dataset.hpp"
#include "frustumvox/dhs.hpp"
#include "frustumvox/error.hpp"
#include "frustumvox/geometry.hpp"
#include "frustumvox/head.hpp"
#include "frustumvox/scenegen.hpp"

namespace fvx {

namespace fs = std::filesystem;
using nlohmann::json;

namespace jsonio {

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  require(obj.is_object(), where + ": expected a JSON object", ErrorCode::format);
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(ErrorCode::format, where + ": unknown key '" + key + "'");
    }
  }
}

template <std::size_t N>
std::array<double, N> numbers(const json& j, const std::string& where) {
  require(j.is_array() && j.size() == N,
          where + ": expected an array of " + std::to_string(N) + " numbers", ErrorCode::format);
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    require(j[i].is_number(), where + ": expected numbers", ErrorCode::format);
    out[i] = j[i].get<double>();
  }
  return out;
}

inline json to_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }
inline Point3 point_from(const json& j, const std::string& where) {
  const auto a = numbers<3>(j, where);
  return {a[0], a[1], a[2]};
}

inline json to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx()}, {"fy", k.fy()}, {"cx", k.cx()}, {"cy", k.cy()},
          {"width", k.width()}, {"height", k.height()}};
}
inline CameraIntrinsics intrinsics_from(const json& j, const std::string& where) {
  check_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, where);
  return {j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
          j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>()};
}

inline json to_json(const Pose& p) {
  return {{"rotation", p.rotation.m}, {"translation", to_json(p.translation)}};
}
inline Pose pose_from(const json& j, const std::string& where) {
  check_keys(j, {"rotation", "translation"}, where);
  Pose p;
  p.rotation.m = numbers<9>(j.at("rotation"), where + " rotation");
  p.translation = point_from(j.at("translation"), where + " translation");
  return p;
}

inline json to_json(const Rect2& r) { return json::array({r.u_min(), r.v_min(), r.u_max(), r.v_max()}); }
inline Rect2 rect_from(const json& j, const std::string& where) {
  const auto a = numbers<4>(j, where);
  return {a[0], a[1], a[2], a[3]};
}

inline json to_json(const OrientedBox3& b) {
  return {{"center", to_json(b.center())},
          {"size", json::array({b.width(), b.depth(), b.height()})},
          {"yaw", b.yaw()}};
}
inline OrientedBox3 box_from(const json& j, const std::string& where) {
  check_keys(j, {"center", "size", "yaw"}, where);
  const auto s = numbers<3>(j.at("size"), where + " size");
  return {point_from(j.at("center"), where + " center"), s[0], s[1], s[2],
          j.value("yaw", 0.0)};
}

inline json read_file(const fs::path& path) {
  auto is = io::open_in(path, false);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::format, path.string() + ": " + e.what());
  }
}

inline void write_file(const fs::path& path, const json& j) {
  auto os = io::open_out(path, false);
  os << j.dump(2) << '\n';
}

}  // namespace jsonio

// ---------------------------------------------------------------------------
// Scene specs

/// {"intrinsics", "pose", "objects": [{"category", "box", "density"}],
///  "background": [{"normal": [3], "offset"}], "background_stride",
///  "occlusion", "depth_noise", "near", "far", "seed"}
inline scene::SceneSpec scene_from_json(const json& j) {
  using namespace jsonio;
  try {
    check_keys(j, {"intrinsics", "pose", "objects", "background", "background_stride", "occlusion",
                   "depth_noise", "near", "far", "seed"},
               "scene");
    scene::SceneSpec s;
    if (j.contains("intrinsics")) s.intrinsics = intrinsics_from(j["intrinsics"], "scene intrinsics");
    if (j.contains("pose")) s.pose = pose_from(j["pose"], "scene pose");
    for (const auto& o : j.value("objects", json::array())) {
      check_keys(o, {"category", "box", "density"}, "scene object");
      s.objects.push_back({o.at("category").get<std::string>(), box_from(o.at("box"), "scene object box"),
                           o.value("density", 400.0)});
    }
    if (j.contains("background")) {
      s.background.clear();
      for (const auto& p : j["background"]) {
        check_keys(p, {"normal", "offset"}, "scene background");
        s.background.push_back({point_from(p.at("normal"), "background normal"), p.at("offset").get<double>()});
      }
    }
    s.background_stride = j.value("background_stride", s.background_stride);
    s.occlusion = j.value("occlusion", s.occlusion);
    s.depth_noise = j.value("depth_noise", s.depth_noise);
    s.range.near = j.value("near", s.range.near);
    s.range.far = j.value("far", s.range.far);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("scene: ") + e.what());
  }
}

inline json scene_to_json(const scene::SceneSpec& s) {
  using jsonio::to_json;
  json objects = json::array();
  for (const auto& o : s.objects) {
    objects.push_back({{"category", o.category}, {"box", to_json(o.box)}, {"density", o.density}});
  }
  json bg = json::array();
  for (const auto& p : s.background) bg.push_back({{"normal", to_json(p.normal)}, {"offset", p.offset}});
  return {{"intrinsics", to_json(s.intrinsics)},
          {"pose", to_json(s.pose)},
          {"objects", objects},
          {"background", bg},
          {"background_stride", s.background_stride},
          {"occlusion", s.occlusion},
          {"depth_noise", s.depth_noise},
          {"near", s.range.near},
          {"far", s.range.far},
          {"seed", s.seed}};
}

// ---------------------------------------------------------------------------
// Manifests

struct FrameRecord {
  fs::path cloud;
  std::optional<fs::path> range_image;
  CameraIntrinsics intrinsics;
  Pose pose;
  std::vector<ObjectSample> objects;
};

struct Manifest {
  fs::path base;  // directory relative paths resolve against
  std::vector<std::string> vocabulary;
  std::optional<fs::path> anchors;
  std::vector<FrameRecord> frames;

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base / p; }
};

inline Manifest manifest_from_json(const json& j, const fs::path& base) {
  using namespace jsonio;
  Manifest m;
  m.base = base;
  try {
    check_keys(j, {"vocabulary", "anchors", "frames"}, "manifest");
    m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    require(!m.vocabulary.empty(), "manifest: empty vocabulary", ErrorCode::format);
    const std::set<std::string> vocab(m.vocabulary.begin(), m.vocabulary.end());
    if (j.contains("anchors")) m.anchors = j["anchors"].get<std::string>();
    for (const auto& fj : j.at("frames")) {
      const std::string where = "manifest frame " + std::to_string(m.frames.size());
      check_keys(fj, {"cloud", "range_image", "intrinsics", "pose", "objects"}, where);
      FrameRecord r{fj.at("cloud").get<std::string>(), std::nullopt,
                    intrinsics_from(fj.at("intrinsics"), where + " intrinsics"),
                    pose_from(fj.at("pose"), where + " pose"), {}};
      if (fj.contains("range_image")) r.range_image = fj["range_image"].get<std::string>();
      for (const auto& oj : fj.value("objects", json::array())) {
        check_keys(oj, {"category", "rect", "box"}, where + " object");
        ObjectSample o{oj.at("category").get<std::string>(), rect_from(oj.at("rect"), where + " rect"),
                       box_from(oj.at("box"), where + " box")};
        require(vocab.contains(o.category),
                where + ": category '" + o.category + "' is not in the vocabulary", ErrorCode::format);
        r.objects.push_back(std::move(o));
      }
      m.frames.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::invalid_argument) fail(ErrorCode::format, e.what());
    throw;
  }
  return m;
}

/// Parses and checks that every referenced file exists.
inline Manifest load_manifest(const fs::path& path) {
  const json j = jsonio::read_file(path);
  Manifest m = manifest_from_json(j, path.parent_path());
  auto exists = [&](const fs::path& p) {
    require(fs::exists(m.resolve(p)), "manifest: missing file " + m.resolve(p).string(), ErrorCode::io);
  };
  if (m.anchors) exists(*m.anchors);
  for (const auto& r : m.frames) {
    exists(r.cloud);
    if (r.range_image) exists(*r.range_image);
  }
  return m;
}

inline json manifest_to_json(const Manifest& m) {
  using jsonio::to_json;
  json frames = json::array();
  for (const auto& r : m.frames) {
    json objects = json::array();
    for (const auto& o : r.objects) {
      objects.push_back({{"category", o.category}, {"rect", to_json(o.rect)}, {"box", to_json(o.box)}});
    }
    json fj = {{"cloud", r.cloud.generic_string()},
               {"intrinsics", to_json(r.intrinsics)},
               {"pose", to_json(r.pose)},
               {"objects", objects}};
    if (r.range_image) fj["range_image"] = r.range_image->generic_string();
    frames.push_back(std::move(fj));
  }
  json j = {{"vocabulary", m.vocabulary}, {"frames", frames}};
  if (m.anchors) j["anchors"] = m.anchors->generic_string();
  return j;
}

inline Frame load_frame(const Manifest& m, const FrameRecord& r) {
  return {load_cloud(m.resolve(r.cloud)), r.intrinsics, r.pose, r.objects};
}

inline RangeImage load_range(const Manifest& m, const FrameRecord& r) {
  require(r.range_image.has_value(), "frame has no range image", ErrorCode::io);
  auto is = io::open_in(m.resolve(*r.range_image), true);
  return read_range_image(is, r.intrinsics, r.pose);
}

inline std::vector<Frame> load_frames(const Manifest& m) {
  std::vector<Frame> frames;
  frames.reserve(m.frames.size());
  for (const auto& r : m.frames) frames.push_back(load_frame(m, r));
  return frames;
}

/// Anchors from the manifest's table if it names one, else averaged from its boxes.
inline AnchorTable manifest_anchors(const Manifest& m) {
  if (m.anchors) {
    auto is = io::open_in(m.resolve(*m.anchors), false);
    return read_anchors_csv(is);
  }
  std::map<std::string, std::vector<OrientedBox3>> boxes;
  for (const auto& r : m.frames) {
    for (const auto& o : r.objects) boxes[o.category].push_back(o.box);
  }
  return compute_anchors(boxes);
}

}  // namespace fvx
