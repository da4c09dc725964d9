#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "frustumvox/netshape.hpp"
#include "frustumvox/scale.hpp"
#include "frustumvox/voxel.hpp"
#include "support.hpp"

using namespace fvx;
using namespace fvx::net;
using fvx::testing::Gen;

namespace {
VoxelGrid random_grid(int n, Gen& g) {
  VoxelGrid grid(GridShape{n, n, n}, {0.1, 0.1, 0.1}, {0, 0, 0});
  for (auto& c : grid.data()) c = static_cast<std::uint32_t>(g.integer(0, 3));
  return grid;
}
}  // namespace

TEST(Propagate, HandComputedDefaultTables) {
  // Spatial dims after each stride-2 "same" convolution: ceil(n / 2).
  struct Case {
    ScaleName s;
    std::vector<std::array<int, 3>> dims;
  };
  const Case cases[] = {
      {ScaleName::large_short, {{198, 198, 102}, {99, 99, 51}, {50, 50, 26}, {25, 25, 13}, {13, 13, 7}}},
      {ScaleName::medium_tall, {{134, 134, 134}, {67, 67, 67}, {34, 34, 34}, {17, 17, 17}, {9, 9, 9}}},
  };
  const int channels[] = {32, 64, 64, 128, 128};
  for (const auto& c : cases) {
    const auto plan = default_plan(scale_spec(c.s).grid, 10);
    ASSERT_EQ(plan.outputs.size(), 12u);
    for (int k = 0; k < 5; ++k) {
      const auto& conv = plan.outputs[2 * k];
      EXPECT_EQ(conv.w, c.dims[k][0]);
      EXPECT_EQ(conv.d, c.dims[k][1]);
      EXPECT_EQ(conv.h, c.dims[k][2]);
      EXPECT_EQ(conv.c, channels[k]);
      EXPECT_EQ(plan.outputs[2 * k + 1], conv);  // dropout keeps the shape
    }
    EXPECT_EQ(plan.outputs[10].c, 70);
    EXPECT_EQ(plan.outputs.back(), (TensorShape{1, 1, 1, 70}));
    EXPECT_EQ(plan.final_length, 70);
  }
}

TEST(Propagate, EveryScaleEndsInSevenPerCategory) {
  for (auto s : kAllScales) {
    for (int c : {1, 10, 19}) EXPECT_EQ(default_plan(scale_spec(s).grid, c).final_length, 7 * c);
  }
}

TEST(Propagate, StrideOneSameKeepsDims) {
  LayerSpec l{LayerKind::conv3d, {3, 3, 3}, {1, 1, 1}, 8, Padding::same};
  const std::vector<LayerSpec> layers{l};
  const auto p = propagate({17, 9, 5, 2}, layers);
  EXPECT_EQ(p.outputs[0], (TensorShape{17, 9, 5, 8}));
}

TEST(Propagate, ValidStrideTwoOnOddDimFails) {
  LayerSpec l{LayerKind::conv3d, {2, 2, 2}, {2, 2, 2}, 8, Padding::valid};
  const std::vector<LayerSpec> layers{l};
  try {
    propagate({9, 8, 8, 1}, layers);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape_mismatch);
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
}

TEST(PlanJson, ParsesAndRejectsUnknownKeys) {
  const auto j = nlohmann::json::parse(R"({"input": [8, 8, 8, 1], "layers": [
      {"kind": "conv3d", "kernel": 3, "stride": [2, 2, 2], "channels_out": 4},
      {"kind": "global_reduce"}]})");
  const auto p = plan_from_json(j);
  EXPECT_EQ(p.final_length, 4);
  auto bad = j;
  bad["layers"][0]["chanels_out"] = 4;
  EXPECT_THROW(plan_from_json(bad), Error);
}

TEST(Forward, ZeroGridZeroBiasGivesZero) {
  const auto plan = default_plan({16, 16, 16}, 3);
  const VoxelGrid grid(GridShape{16, 16, 16}, {0.1, 0.1, 0.1}, {0, 0, 0});
  for (double v : forward_naive(grid, plan, 1)) EXPECT_EQ(v, 0.0);
}

TEST(Forward, ShapeFinitenessAndSeededReproducibility) {
  Gen g(1);
  const auto plan = default_plan({16, 16, 16}, 4);
  const auto grid = random_grid(16, g);
  const auto a = forward_naive(grid, plan, 7);
  const auto b = forward_naive(grid, plan, 7);
  ASSERT_EQ(static_cast<std::int64_t>(a.size()), plan.final_length);
  EXPECT_EQ(a, b);
  for (double v : a) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NE(a, forward_naive(grid, plan, 8));
}

TEST(Forward, FinalLayerIsHomogeneous) {
  Gen g(2);
  const auto plan = default_plan({16, 16, 16}, 2);
  const auto grid = random_grid(16, g);
  auto w = init_weights(plan, 3);
  const auto base = forward(grid, plan, w);
  for (auto& x : w.layers[10].kernel) x *= 2;
  const auto doubled = forward(grid, plan, w);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(doubled[i], 2 * base[i], 1e-12 * (1 + std::abs(base[i])));
}

TEST(Forward, RejectsMismatchedOrOversizedGrids) {
  const auto plan = default_plan({16, 16, 16}, 2);
  const VoxelGrid other(GridShape{8, 16, 16}, {0.1, 0.1, 0.1}, {0, 0, 0});
  EXPECT_THROW(forward_naive(other, plan, 1), Error);
  const auto big = default_plan({64, 64, 64}, 2);
  const VoxelGrid grid(GridShape{64, 64, 64}, {0.1, 0.1, 0.1}, {0, 0, 0});
  EXPECT_THROW(forward_naive(grid, big, 1), Error);
}

TEST(ShapeTable, PrintsFinalLength) {
  std::ostringstream os;
  print_shape_table(os, default_plan({198, 198, 102}, 10));
  EXPECT_NE(os.str().find("final flat length: 70"), std::string::npos);
}
