#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <set>

#include "frustumvox/manifest.hpp"
#include "frustumvox/scale.hpp"
#include "frustumvox/scenegen.hpp"
#include "support.hpp"

using namespace fvx;
using fvx::testing::in_box;

namespace {
// Distance from p to the surface of b, for p inside or near b.
double box_surface_distance(const OrientedBox3& b, const Point3& p) {
  const double c = std::cos(b.yaw()), s = std::sin(b.yaw());
  const double dx = p.x - b.center().x, dy = p.y - b.center().y;
  const double a[3] = {std::abs(dx * c + dy * s), std::abs(-dx * s + dy * c), std::abs(p.z - b.center().z)};
  const double h[3] = {b.width() / 2, b.depth() / 2, b.height() / 2};
  double out = 0.0, gap_in = HUGE_VAL;
  for (int i = 0; i < 3; ++i) {
    out = std::hypot(out, std::max(0.0, a[i] - h[i]));
    gap_in = std::min(gap_in, h[i] - a[i]);
  }
  return out > 0.0 ? out : gap_in;
}

double surface_distance(const scene::SceneSpec& spec, const Point3& p) {
  double best = HUGE_VAL;
  for (const auto& o : spec.objects) best = std::min(best, box_surface_distance(o.box, p));
  for (const auto& pl : spec.background) {
    best = std::min(best, std::abs(dot(pl.normal, p) - pl.offset) / norm(pl.normal));
  }
  return best;
}

scene::SceneSpec level_single_box() {
  scene::SceneSpec spec;
  spec.background.clear();
  spec.pose = Pose::looking({0, 0, 1.2}, 0.0, 0.0);
  spec.occlusion = false;
  spec.objects = {{"table", OrientedBox3({0.2, 3.5, 0.4}, 0.9, 0.6, 0.8, 0.0), 800.0}};
  return spec;
}
}  // namespace

TEST(Render, AxisAlignedBoxRectIsProjectedExtent) {
  const auto spec = level_single_box();
  const auto r = scene::render(spec);
  ASSERT_EQ(r.objects.size(), 1u);
  ASSERT_TRUE(r.objects[0].rect.has_value());
  // Level camera at height 1.2 facing +y: cam = (x, 1.2 - z, y).
  const auto& b = spec.objects[0].box;
  double u_lo = HUGE_VAL, u_hi = -HUGE_VAL, v_lo = HUGE_VAL, v_hi = -HUGE_VAL;
  for (double x : {b.center().x - 0.45, b.center().x + 0.45}) {
    for (double y : {b.center().y - 0.3, b.center().y + 0.3}) {
      for (double z : {b.center().z - 0.4, b.center().z + 0.4}) {
        double u, v;
        ASSERT_TRUE(fvx::testing::pinhole({x, 1.2 - z, y}, 280, 280, 160, 120, u, v));
        u_lo = std::min(u_lo, u);
        u_hi = std::max(u_hi, u);
        v_lo = std::min(v_lo, v);
        v_hi = std::max(v_hi, v);
      }
    }
  }
  const Rect2& rect = *r.objects[0].rect;
  EXPECT_NEAR(rect.u_min(), u_lo, 1e-9);
  EXPECT_NEAR(rect.u_max(), u_hi, 1e-9);
  EXPECT_NEAR(rect.v_min(), v_lo, 1e-9);
  EXPECT_NEAR(rect.v_max(), v_hi, 1e-9);
  ASSERT_GT(r.cloud.size(), 100u);
  for (const auto& p : r.cloud) EXPECT_TRUE(b.contains(p, 1e-9) || in_box(b, p));
  EXPECT_FALSE(r.warning);
}

TEST(Render, OcclusionShrinksTheFarRect) {
  scene::SceneSpec spec = level_single_box();
  spec.objects = {{"near", OrientedBox3({0.0, 2.0, 0.6}, 0.6, 0.3, 1.2), 800.0},
                  {"far", OrientedBox3({0.6, 4.0, 0.6}, 0.8, 0.5, 1.2), 800.0}};
  const auto open = scene::render(spec);
  spec.occlusion = true;
  const auto hidden = scene::render(spec);
  ASSERT_TRUE(open.objects[1].rect.has_value());
  ASSERT_TRUE(hidden.objects[1].rect.has_value());
  const Rect2 a = *open.objects[1].rect, h = *hidden.objects[1].rect;
  EXPECT_LT(h.width() * h.height(), a.width() * a.height());
  EXPECT_LT(hidden.objects[1].visible_points, open.objects[1].visible_points);

  // Directly behind and smaller: nothing of the far box survives.
  spec.objects[1].box = OrientedBox3({0.0, 4.0, 0.6}, 0.3, 0.3, 0.5);
  const auto gone = scene::render(spec);
  EXPECT_FALSE(gone.objects[1].rect.has_value());
  EXPECT_EQ(gone.objects[1].status, scene::ObjectStatus::fully_occluded);
  EXPECT_TRUE(gone.warning);
}

TEST(Render, SeedFixesEverything) {
  const auto spec = scene::random_scene(77);
  const auto a = scene::render(spec), b = scene::render(spec);
  ASSERT_EQ(a.cloud.size(), b.cloud.size());
  EXPECT_EQ(0, std::memcmp(a.cloud.data(), b.cloud.data(), a.cloud.size() * sizeof(Point3)));
  EXPECT_TRUE(std::equal(a.range.data().begin(), a.range.data().end(), b.range.data().begin()));
  EXPECT_EQ(a.labels, b.labels);
  auto other = spec;
  other.seed += 1;
  const auto c = scene::render(other);
  EXPECT_FALSE(c.cloud.size() == a.cloud.size() &&
               std::memcmp(c.cloud.data(), a.cloud.data(), a.cloud.size() * sizeof(Point3)) == 0);
}

TEST(Render, PointsLieOnGeneratedSurfaces) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = scene::random_scene(seed);
    const auto r = scene::render(spec);
    for (const auto& p : r.cloud) ASSERT_LT(surface_distance(spec, p), 1e-6);
    for (int v = 0; v < r.range.height(); v += 3) {
      for (int u = 0; u < r.range.width(); u += 3) {
        if (!r.range.valid(u, v)) continue;
        ASSERT_LT(surface_distance(spec, r.range.world_point(u, v)), 1e-6) << u << "," << v;
      }
    }
  }
}

TEST(Render, RectContainsVisiblePoints) {
  for (bool occlusion : {true, false}) {
    scene::RandomSceneOptions opt;
    opt.occlusion = occlusion;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
      const auto spec = scene::random_scene(seed, opt);
      const auto r = scene::render(spec);
      for (std::size_t i = 0; i < r.cloud.size(); ++i) {
        const int label = r.labels[i];
        if (label < 0) continue;
        ASSERT_TRUE(r.objects[label].rect.has_value());
        const Point3 cam = spec.pose.to_camera(r.cloud[i]);
        double u, v;
        ASSERT_TRUE(fvx::testing::pinhole(cam, 280, 280, 160, 120, u, v));
        const Rect2& rect = *r.objects[label].rect;
        EXPECT_TRUE(u >= rect.u_min() - 1e-9 && u <= rect.u_max() + 1e-9 && v >= rect.v_min() - 1e-9 &&
                    v <= rect.v_max() + 1e-9);
      }
    }
  }
}

TEST(Render, ObjectBehindCameraIsExcluded) {
  auto spec = level_single_box();
  spec.objects.push_back({"chair", OrientedBox3({0, -2.0, 0.3}, 0.4, 0.4, 0.6), 400.0});
  const auto r = scene::render(spec);
  EXPECT_TRUE(r.warning);
  EXPECT_EQ(r.objects[1].status, scene::ObjectStatus::behind_camera);
  EXPECT_FALSE(r.objects[1].rect.has_value());
  EXPECT_EQ(r.to_frame().objects.size(), 1u);
}

TEST(Render, RejectsBadSpecs) {
  auto spec = level_single_box();
  spec.objects[0].density = 0.0;
  EXPECT_THROW(scene::render(spec), Error);
}

TEST(Render, DatasetCoversAllScales) {
  const auto frames = scene::random_dataset(40, 5);
  EXPECT_EQ(frames.size(), 40u);
  std::map<std::string, std::vector<OrientedBox3>> boxes;
  for (const auto& f : frames) {
    for (const auto& o : f.objects) boxes[o.category].push_back(o.box);
  }
  std::set<ScaleName> scales;
  for (const auto& p : scene::category_presets()) scales.insert(assign_scale(p.w, p.d, p.h));
  EXPECT_EQ(scales.size(), 4u);
}

TEST(SceneJson, RoundTrip) {
  auto spec = scene::random_scene(9);
  spec.depth_noise = 0.01;
  const auto back = scene_from_json(json::parse(scene_to_json(spec).dump()));
  const auto a = scene::render(spec), b = scene::render(back);
  ASSERT_EQ(a.cloud.size(), b.cloud.size());
  EXPECT_EQ(0, std::memcmp(a.cloud.data(), b.cloud.data(), a.cloud.size() * sizeof(Point3)));
}

TEST(SceneJson, UnknownKeyIsFormatError) {
  auto j = scene_to_json(scene::random_scene(1));
  j["colour"] = "red";
  try {
    scene_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::format);
  }
}
