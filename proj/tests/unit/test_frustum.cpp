#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "frustumvox/frustum.hpp"
#include "support.hpp"

using namespace fvx;
using fvx::testing::Gen;

namespace {
const CameraIntrinsics kK{300.0, 300.0, 160.0, 120.0, 320, 240};
const Pose kPose = Pose::looking({0.2, -0.5, 1.1}, 0.3, 0.2);

PointCloud random_cloud(Gen& g, int n) {
  PointCloud c;
  for (int i = 0; i < n; ++i) c.push_back({g.uni(-4, 4), g.uni(-2, 8), g.uni(-1, 3)});
  return c;
}
}  // namespace

TEST(Subdivide, IdentityForOneByOne) {
  const Rect2 r(3, 4, 50, 70);
  const auto out = subdivide_rect(r, 1, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], r);
}

TEST(Subdivide, NineEqualThirds) {
  const auto out = subdivide_rect(Rect2(0, 0, 9, 9), 3, 3);
  ASSERT_EQ(out.size(), 9u);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(out[r * 3 + c], Rect2(3.0 * c, 3.0 * r, 3.0 * c + 3, 3.0 * r + 3));
    }
  }
}

TEST(Subdivide, TilesExactlyForAllSmallGrids) {
  Gen g(1);
  for (int trial = 0; trial < 50; ++trial) {
    const double u0 = g.uni(0, 100), v0 = g.uni(0, 100);
    const Rect2 r(u0, v0, u0 + g.uni(1, 200), v0 + g.uni(1, 200));
    for (int fr = 1; fr <= 8; ++fr) {
      for (int fc = 1; fc <= 8; ++fc) {
        const auto cells = subdivide_rect(r, fr, fc);
        ASSERT_EQ(cells.size(), static_cast<std::size_t>(fr * fc));
        double area = 0;
        for (const auto& c : cells) area += c.area();
        EXPECT_NEAR(area, r.area(), 1e-9 * r.area());
        // Neighbours share edges exactly; outer edges coincide with the parent.
        for (int i = 0; i < fr; ++i) {
          EXPECT_EQ(cells[i * fc].u_min(), r.u_min());
          EXPECT_EQ(cells[i * fc + fc - 1].u_max(), r.u_max());
          for (int j = 0; j + 1 < fc; ++j) {
            EXPECT_EQ(cells[i * fc + j].u_max(), cells[i * fc + j + 1].u_min());
          }
        }
        for (int j = 0; j < fc; ++j) {
          EXPECT_EQ(cells[j].v_min(), r.v_min());
          EXPECT_EQ(cells[(fr - 1) * fc + j].v_max(), r.v_max());
        }
      }
    }
  }
}

TEST(Frustum, DegenerateRectIsRejected) {
  EXPECT_THROW(Frustum(Rect2(10, 10, 10, 20), kK, kPose), Error);
}

TEST(Frustum, FullImageContainsEveryVisiblePoint) {
  Gen g(2);
  const Frustum f(Rect2(0, 0, kK.width(), kK.height()), kK, kPose);
  for (const auto& p : random_cloud(g, 5000)) {
    const Point3 c = kPose.to_camera(p);
    double u, v;
    const bool visible = fvx::testing::pinhole(c, kK.fx(), kK.fy(), kK.cx(), kK.cy(), u, v) &&
                         c.z > 0.1 && c.z < 10 && u >= 0 && u < kK.width() && v >= 0 &&
                         v < kK.height();
    if (visible) {
      EXPECT_TRUE(f.contains(p));
    }
  }
}

TEST(Frustum, CornerRayPointsAreOnTheBoundary) {
  const Rect2 r(50, 40, 200, 180);
  const Frustum f(r, kK, kPose);
  for (const auto& ray : f.corner_rays()) {
    const Point3 p = f.apex() + 3.0 * ray;
    EXPECT_EQ(f.classify(p), Containment::boundary);
  }
  // Midpoint of the rect lies strictly inside.
  const Point3 mid = kPose.to_world(unproject({r.center_u(), r.center_v()}, 3.0, kK));
  EXPECT_EQ(f.classify(mid), Containment::inside);
}

TEST(Frustum, MembershipMatchesProjectionOracle) {
  Gen g(3);
  const Rect2 r(60, 30, 250, 200);
  const Frustum f(r, kK, kPose);
  const auto cloud = random_cloud(g, 1000);
  const auto idx = points_in_frustum(cloud, f);
  std::vector<std::size_t> oracle;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3 c = kPose.to_camera(cloud[i]);
    double u, v;
    if (!fvx::testing::pinhole(c, kK.fx(), kK.fy(), kK.cx(), kK.cy(), u, v)) continue;
    if (c.z > 0.1 && c.z < 10 && u >= r.u_min() && u < r.u_max() && v >= r.v_min() && v < r.v_max()) {
      oracle.push_back(i);
    }
  }
  EXPECT_EQ(idx, oracle);
  EXPECT_FALSE(idx.empty());
}

TEST(Frustum, EmptyCloudAndPointsBehindSensor) {
  const Frustum f(Rect2(0, 0, 320, 240), kK, Pose::identity());
  EXPECT_TRUE(points_in_frustum(PointCloud{}, f).empty());
  EXPECT_FALSE(f.contains({0, 0, -2}));
  EXPECT_TRUE(f.contains({0, 0, 2}));
}

TEST(Frustum, MembershipIsPermutationEquivariant) {
  Gen g(4);
  const Frustum f(Rect2(20, 20, 300, 220), kK, kPose);
  auto cloud = random_cloud(g, 2000);
  std::vector<std::size_t> perm(cloud.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), g.engine());
  PointCloud shuffled;
  for (auto i : perm) shuffled.push_back(cloud[i]);
  const auto a = points_in_frustum(cloud, f);
  auto b = points_in_frustum(shuffled, f);
  for (auto& i : b) i = perm[i];
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Frustum, SubfrustumsPartitionTheirParent) {
  Gen g(5);
  const Rect2 r(40, 30, 280, 210);
  const Frustum parent(r, kK, kPose);
  PointCloud cloud = random_cloud(g, 3000);
  // Points exactly on interior grid lines.
  const auto cells = subdivide_rect(r, 3, 4);
  for (const auto& c : cells) {
    cloud.push_back(kPose.to_world(unproject({c.u_min(), c.center_v()}, 2.5, kK)));
    cloud.push_back(kPose.to_world(unproject({c.center_u(), c.v_min()}, 2.5, kK)));
  }
  for (const auto& p : cloud) {
    int owners = 0;
    for (const auto& c : cells) owners += Frustum(c, kK, kPose).contains(p);
    EXPECT_EQ(owners, parent.contains(p) ? 1 : 0);
  }
}

TEST(Center, SinglePointAndMidpoint) {
  const PointCloud one{{1, 2, 3}};
  for (auto m : {CenterMode::average, CenterMode::median}) {
    const Point3 c = point_center(one, m);
    EXPECT_EQ(c, (Point3{1, 2, 3}));
  }
  const Point3 mid = point_center(PointCloud{{0, 0, 0}, {2, 4, 6}}, CenterMode::average);
  EXPECT_EQ(mid, (Point3{1, 2, 3}));
  EXPECT_THROW(point_center(PointCloud{}, CenterMode::average), Error);
}

TEST(Center, MedianResistsAnOutlier) {
  Gen g(6);
  PointCloud pts;
  Point3 centroid{0, 0, 0};
  for (int i = 0; i < 99; ++i) {
    pts.push_back({1 + g.normal(0.05), 2 + g.normal(0.05), 0.5 + g.normal(0.05)});
    centroid = centroid + pts.back();
  }
  centroid = (1.0 / 99) * centroid;
  pts.push_back({40, -30, 20});
  const double dm = norm(point_center(pts, CenterMode::median) - centroid);
  const double da = norm(point_center(pts, CenterMode::average) - centroid);
  EXPECT_LT(dm, da);
}

TEST(Center, FrustumCenterFailsWithoutPoints) {
  const Frustum f(Rect2(0, 0, 10, 10), kK, Pose::identity());
  try {
    frustum_center(PointCloud{{0, 0, 5}}, f, CenterMode::average);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_center);
  }
}

TEST(Center, ModeNamesRoundTrip) {
  EXPECT_EQ(parse_center_mode(to_string(CenterMode::median)), CenterMode::median);
  EXPECT_THROW(parse_center_mode("mean"), Error);
}
