#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "frustumvox/camera.hpp"
#include "frustumvox/dataset.hpp"
#include "frustumvox/dhs.hpp"
#include "frustumvox/error.hpp"
#include "frustumvox/frustum.hpp"
#include "frustumvox/geometry.hpp"
#include "frustumvox/rng.hpp"

namespace fvx::scene {

struct SceneObject {
  std::string category;
  OrientedBox3 box;
  double density = 400.0;  // points per m^2 of visible surface
};

/// Infinite plane {p : dot(normal, p) = offset}.
struct Plane {
  Point3 normal{0, 0, 1};
  double offset = 0.0;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  CameraIntrinsics intrinsics{280.0, 280.0, 160.0, 120.0, 320, 240};
  Pose pose = Pose::looking({0.0, 0.0, 1.2}, 0.0, 0.25);
  std::vector<Plane> background;
  // Background planes contribute one point per `background_stride`-th pixel.
  int background_stride = 4;
  bool occlusion = true;
  double depth_noise = 0.0;  // m, Gaussian sigma along the viewing ray
  DepthRange range;
  std::uint64_t seed = 0;

  void validate() const {
    for (const auto& o : objects) {
      require(o.density > 0.0, "scene: object density must be positive");
    }
    require(background_stride >= 1, "scene: background stride must be >= 1");
    require(depth_noise >= 0.0, "scene: depth noise must be non-negative");
    require(range.near > 0.0 && range.near < range.far, "scene: need 0 < near < far");
  }
};

enum class ObjectStatus { ok, behind_camera, out_of_view, fully_occluded };

inline const char* to_string(ObjectStatus s) {
  switch (s) {
    case ObjectStatus::ok: return "ok";
    case ObjectStatus::behind_camera: return "behind_camera";
    case ObjectStatus::out_of_view: return "out_of_view";
    case ObjectStatus::fully_occluded: return "fully_occluded";
  }
  return "?";
}

struct RenderedObject {
  std::string category;
  OrientedBox3 box;
  std::optional<Rect2> rect;  // empty unless status == ok
  ObjectStatus status = ObjectStatus::ok;
  std::size_t visible_points = 0;
};

struct RenderedScene {
  PointCloud cloud;
  std::vector<int> labels;  // object index per point, -1 for background
  RangeImage range;
  std::vector<RenderedObject> objects;
  bool warning = false;  // some object was excluded

  Frame to_frame() const {
    Frame f{cloud, range.intrinsics(), range.pose(), {}};
    for (const auto& o : objects) {
      if (o.rect) f.objects.push_back({o.category, *o.rect, o.box});
    }
    return f;
  }
};

namespace detail {

// Ray parameter of the first intersection with the box, if any. The ray is
// origin + t * dir with t > 0.
inline std::optional<double> ray_box(const Point3& origin, const Point3& dir, const OrientedBox3& b) {
  const Point3 o = b.to_local(origin);
  const double c = std::cos(b.yaw()), s = std::sin(b.yaw());
  const Point3 d{c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z};
  const double half[3] = {0.5 * b.width(), 0.5 * b.depth(), 0.5 * b.height()};
  const double oo[3] = {o.x, o.y, o.z};
  const double dd[3] = {d.x, d.y, d.z};
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dd[a] == 0.0) {
      if (std::abs(oo[a]) > half[a]) return std::nullopt;
      continue;
    }
    double ta = (-half[a] - oo[a]) / dd[a];
    double tb = (half[a] - oo[a]) / dd[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t1 <= 0.0) return std::nullopt;
  return t0 > 0.0 ? t0 : t1;
}

inline std::optional<double> ray_plane(const Point3& origin, const Point3& dir, const Plane& p) {
  const double den = dot(p.normal, dir);
  if (den == 0.0) return std::nullopt;
  const double t = (p.offset - dot(p.normal, origin)) / den;
  if (t <= 0.0) return std::nullopt;
  return t;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int object = -2;  // -2 none, -1 background, >= 0 object index
};

inline Hit first_hit(const Point3& origin, const Point3& dir, const SceneSpec& spec) {
  Hit h;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    if (auto t = ray_box(origin, dir, spec.objects[i].box); t && *t < h.t) {
      h = {*t, static_cast<int>(i)};
    }
  }
  for (const auto& p : spec.background) {
    if (auto t = ray_plane(origin, dir, p); t && *t < h.t) h = {*t, -1};
  }
  return h;
}

struct Face {
  Point3 center;
  Point3 normal;
  Point3 axis_u, axis_v;  // half-extent vectors spanning the face
};

inline std::array<Face, 6> box_faces(const OrientedBox3& b) {
  const Vec2 hx = b.heading();
  const Point3 ex{hx.x, hx.y, 0.0}, ey{-hx.y, hx.x, 0.0}, ez{0.0, 0.0, 1.0};
  const double a = 0.5 * b.width(), d = 0.5 * b.depth(), h = 0.5 * b.height();
  const Point3 c = b.center();
  return {Face{c + a * ex, ex, d * ey, h * ez}, Face{c - a * ex, -1.0 * ex, d * ey, h * ez},
          Face{c + d * ey, ey, a * ex, h * ez}, Face{c - d * ey, -1.0 * ey, a * ex, h * ez},
          Face{c + h * ez, ez, a * ex, d * ey}, Face{c - h * ez, -1.0 * ez, a * ex, d * ey}};
}

}  // namespace detail

/// Samples the camera-facing surfaces of every object, ray-casts a z-buffered
/// range image, and derives one 2D rect per object. Without occlusion a rect
/// is the projected box extent clipped to the image; with occlusion it is the
/// extent of the object's visible pixels and samples.
inline RenderedScene render(const SceneSpec& spec) {
  spec.validate();
  const CameraIntrinsics& K = spec.intrinsics;
  const Pose& pose = spec.pose;
  const Point3 eye = pose.translation;
  Rng rng(spec.seed);

  RenderedScene out{{}, {}, RangeImage(K, pose), {}, false};
  const double W = K.width(), H = K.height();

  // Range image: one ray per integer pixel coordinate.
  std::vector<int> pixel_owner(static_cast<std::size_t>(K.width()) * K.height(), -2);
  for (int v = 0; v < K.height(); ++v) {
    for (int u = 0; u < K.width(); ++u) {
      const Point3 dir = pose.direction_to_world(pixel_ray({double(u), double(v)}, K));
      const auto hit = detail::first_hit(eye, dir, spec);
      if (hit.object == -2 || !(hit.t > spec.range.near && hit.t < spec.range.far)) continue;
      double depth = hit.t;
      if (spec.depth_noise > 0.0) depth = std::max(1e-6, depth + rng.normal(0.0, spec.depth_noise));
      out.range.depth(u, v) = static_cast<float>(depth);
      pixel_owner[static_cast<std::size_t>(v) * K.width() + u] = hit.object;
      if (hit.object == -1 && u % spec.background_stride == 0 && v % spec.background_stride == 0) {
        out.cloud.push_back(eye + depth * dir);
        out.labels.push_back(-1);
      }
    }
  }

  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& obj = spec.objects[i];
    RenderedObject ro{obj.category, obj.box, std::nullopt, ObjectStatus::ok, 0};
    if (pose.to_camera(obj.box.center()).z <= spec.range.near) {
      ro.status = ObjectStatus::behind_camera;
      out.warning = true;
      out.objects.push_back(ro);
      continue;
    }
    double u_lo = HUGE_VAL, v_lo = HUGE_VAL, u_hi = -HUGE_VAL, v_hi = -HUGE_VAL;
    auto grow = [&](double u, double v) {
      u_lo = std::min(u_lo, u);
      v_lo = std::min(v_lo, v);
      u_hi = std::max(u_hi, u);
      v_hi = std::max(v_hi, v);
    };

    for (const auto& face : detail::box_faces(obj.box)) {
      if (dot(face.normal, face.center - eye) >= 0.0) continue;  // back face
      const double area = 4.0 * norm(face.axis_u) * norm(face.axis_v);
      const double expected = obj.density * area;
      auto n = static_cast<std::size_t>(std::floor(expected + rng.uniform()));
      for (std::size_t k = 0; k < n; ++k) {
        const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
        Point3 p = face.center + a * face.axis_u + b * face.axis_v;
        const Point3 cam = pose.to_camera(p);
        const auto px = project(cam, K);
        if (!px || !in_image(*px, K) || !(cam.z > spec.range.near && cam.z < spec.range.far)) continue;
        if (spec.occlusion) {
          const Point3 dir = (1.0 / cam.z) * (p - eye);  // unit camera depth
          const auto hit = detail::first_hit(eye, dir, spec);
          if (hit.object != static_cast<int>(i) && hit.t < cam.z - 1e-9) continue;
        }
        if (spec.depth_noise > 0.0) {
          const double z = std::max(1e-6, cam.z + rng.normal(0.0, spec.depth_noise));
          p = eye + (z / cam.z) * (p - eye);
        }
        out.cloud.push_back(p);
        out.labels.push_back(static_cast<int>(i));
        ++ro.visible_points;
        grow(px->u, px->v);
      }
    }

    if (spec.occlusion) {
      for (int v = 0; v < K.height(); ++v) {
        for (int u = 0; u < K.width(); ++u) {
          if (pixel_owner[static_cast<std::size_t>(v) * K.width() + u] == static_cast<int>(i)) {
            grow(u, v);
          }
        }
      }
      if (u_lo > u_hi) {
        ro.status = ObjectStatus::fully_occluded;
        out.warning = true;
      } else {
        const double lo_u = std::max(0.0, u_lo - 0.5), lo_v = std::max(0.0, v_lo - 0.5);
        const double hi_u = std::min(W, u_hi + 0.5), hi_v = std::min(H, v_hi + 0.5);
        ro.rect = Rect2(lo_u, lo_v, hi_u, hi_v);
      }
    } else {
      // Amodal extent: project the corners, clipping each edge at the near plane.
      double a_lo = HUGE_VAL, b_lo = HUGE_VAL, a_hi = -HUGE_VAL, b_hi = -HUGE_VAL;
      const auto corners = obj.box.corners();
      std::array<Point3, 8> cam;
      for (int c = 0; c < 8; ++c) cam[c] = pose.to_camera(corners[c]);
      auto add = [&](const Point3& q) {
        const auto px = project(q, K);
        a_lo = std::min(a_lo, px->u);
        b_lo = std::min(b_lo, px->v);
        a_hi = std::max(a_hi, px->u);
        b_hi = std::max(b_hi, px->v);
      };
      const double zn = spec.range.near;
      for (int c = 0; c < 8; ++c) {
        if (cam[c].z >= zn) add(cam[c]);
      }
      static constexpr int edges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                           {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
      for (const auto& e : edges) {
        const Point3 &p = cam[e[0]], &q = cam[e[1]];
        if ((p.z < zn) != (q.z < zn)) {
          const double t = (zn - p.z) / (q.z - p.z);
          add(p + t * (q - p));
        }
      }
      const double lo_u = std::max(0.0, a_lo), lo_v = std::max(0.0, b_lo);
      const double hi_u = std::min(W, a_hi), hi_v = std::min(H, b_hi);
      if (lo_u < hi_u && lo_v < hi_v) {
        ro.rect = Rect2(lo_u, lo_v, hi_u, hi_v);
      } else {
        ro.status = ObjectStatus::out_of_view;
        out.warning = true;
      }
    }
    out.objects.push_back(ro);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random scenes

struct CategoryPreset {
  std::string category;
  double w, d, h;  // mean size, m
};

/// Mean sizes chosen so every scale network gets at least one category.
inline const std::vector<CategoryPreset>& category_presets() {
  static const std::vector<CategoryPreset> presets = {
      {"toilet", 0.28, 0.24, 0.45},     {"chair", 0.45, 0.42, 0.50},
      {"nightstand", 0.45, 0.40, 0.50}, {"bookshelf", 0.45, 0.30, 0.90},
      {"table", 0.90, 0.60, 0.45},      {"bed", 1.00, 0.90, 0.50},
  };
  return presets;
}

struct RandomSceneOptions {
  int min_objects = 1;
  int max_objects = 3;
  double size_jitter = 0.10;  // relative, uniform
  double density = 400.0;
  bool floor = true;
  bool wall = true;
  double wall_distance = 6.0;
  bool occlusion = true;
  bool random_yaw = true;
  std::vector<std::string> categories;  // empty = all presets
};

/// Objects rest on the floor in front of a level-ish camera 1.2 m up.
inline SceneSpec random_scene(std::uint64_t seed, const RandomSceneOptions& opt = {}) {
  require(opt.min_objects >= 1 && opt.max_objects >= opt.min_objects,
          "random scene: bad object count range");
  Rng rng(seed);
  SceneSpec spec;
  spec.seed = seed ^ 0x9E3779B97F4A7C15ull;
  spec.occlusion = opt.occlusion;
  if (opt.floor) spec.background.push_back({{0, 0, 1}, 0.0});
  if (opt.wall) spec.background.push_back({{0, -1, 0}, -opt.wall_distance});

  std::vector<CategoryPreset> pool;
  for (const auto& p : category_presets()) {
    if (opt.categories.empty() ||
        std::find(opt.categories.begin(), opt.categories.end(), p.category) != opt.categories.end()) {
      pool.push_back(p);
    }
  }
  require(!pool.empty(), "random scene: no matching category presets");

  const int n = opt.min_objects +
                static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.max_objects - opt.min_objects + 1)));
  for (int i = 0; i < n; ++i) {
    const auto& p = pool[rng.below(pool.size())];
    const double j = opt.size_jitter;
    const double w = p.w * rng.uniform(1.0 - j, 1.0 + j);
    const double d = p.d * rng.uniform(1.0 - j, 1.0 + j);
    const double h = p.h * rng.uniform(1.0 - j, 1.0 + j);
    const double y = rng.uniform(2.0, 4.5);
    const double x = rng.uniform(-0.35, 0.35) * y;
    const double yaw = opt.random_yaw ? rng.uniform(-std::numbers::pi, std::numbers::pi) : 0.0;
    spec.objects.push_back({p.category, OrientedBox3({x, y, 0.5 * h}, w, d, h, yaw), opt.density});
  }
  return spec;
}

/// Renders `count` random scenes and keeps only frames with at least one
/// usable object.
inline std::vector<Frame> random_dataset(std::size_t count, std::uint64_t seed,
                                         const RandomSceneOptions& opt = {}) {
  std::vector<Frame> frames;
  Rng seeds(seed);
  while (frames.size() < count) {
    const auto r = render(random_scene(seeds.next_u64(), opt));
    Frame f = r.to_frame();
    if (!f.objects.empty()) frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace fvx::scene
