#include <gtest/gtest.h>

#include <sstream>

#include "frustumvox/pipesim.hpp"
#include "frustumvox/scenegen.hpp"
#include "support.hpp"

using namespace fvx;

TEST(Pipeline, TimingTableRows) {
  EXPECT_EQ(simulate(5, {29, 48}, PipelineMode::sequential).summary.period, 77.0);
  EXPECT_EQ(simulate(5, {110, 48}, PipelineMode::sequential).summary.period, 158.0);
  EXPECT_EQ(simulate(5, {110, 149}, PipelineMode::sequential).summary.period, 259.0);
  const auto p = simulate(5, {29, 48}, PipelineMode::pipelined).summary;
  EXPECT_EQ(p.period, 48.0);
  EXPECT_EQ(p.throughput_fps, 1000.0 / 48.0);
  EXPECT_EQ(std::round(p.throughput_fps), 21.0);
}

TEST(Pipeline, ZeroThreeDStage) {
  for (auto mode : {PipelineMode::sequential, PipelineMode::pipelined}) {
    EXPECT_EQ(simulate(4, {29, 0}, mode).summary.period, 29.0);
  }
}

TEST(Pipeline, WarmupAndTotals) {
  fvx::testing::Gen g(8);
  for (int trial = 0; trial < 500; ++trial) {
    // Integer ms keep every sum exact.
    const StageTiming t{double(g.integer(0, 200)), double(g.integer(0, 200))};
    const int n = g.integer(1, 40);
    const auto seq = simulate(n, t, PipelineMode::sequential);
    const auto pip = simulate(n, t, PipelineMode::pipelined);
    EXPECT_EQ(seq.summary.first_latency, t.t_2d + t.t_3d);
    EXPECT_EQ(pip.summary.first_latency, t.t_2d + t.t_3d);
    EXPECT_EQ(seq.summary.total_time, n * (t.t_2d + t.t_3d));
    for (const auto& f : seq.frames) EXPECT_EQ(f.done_3d - f.done_2d, t.t_3d);
    const double slot = std::max(t.t_2d, t.t_3d);
    EXPECT_LE(std::abs(pip.summary.total_time - (t.t_2d + n * slot)), slot);
    for (std::size_t i = 0; i < pip.frames.size(); ++i) {
      const auto& f = pip.frames[i];
      // The 3D stage runs on the previous frame's 2D output, so it may
      // finish before this frame's own 2D pass.
      EXPECT_LE(f.start, f.done_2d);
      EXPECT_LE(f.start, f.start_3d);
      EXPECT_LE(f.start_3d, f.done_3d);
      EXPECT_EQ(f.staleness, i == 0 ? 0 : 1);
      if (i > 0) {
        // The 3D stage waits on the previous frame's 2D result.
        EXPECT_GE(f.start_3d, pip.frames[i - 1].done_2d);
        EXPECT_GE(f.start_3d, pip.frames[i - 1].done_3d);
        EXPECT_GE(f.done_3d - pip.frames[i - 1].done_3d, t.t_3d);
      }
    }
  }
}

TEST(Pipeline, SteadyPeriodBetweenCompletions) {
  const auto tr = simulate(20, {29, 48}, PipelineMode::pipelined);
  for (std::size_t i = 2; i < tr.frames.size(); ++i) {
    EXPECT_EQ(tr.frames[i].done_3d - tr.frames[i - 1].done_3d, 48.0);
  }
  const auto tr2 = simulate(20, {110, 48}, PipelineMode::pipelined);
  // A slow 2D stage needs a couple of frames before the 3D unit idles.
  for (std::size_t i = 3; i < tr2.frames.size(); ++i) {
    EXPECT_EQ(tr2.frames[i].done_3d - tr2.frames[i - 1].done_3d, 110.0);
  }
}

TEST(Pipeline, RejectsBadInput) {
  EXPECT_THROW(simulate(0, {1, 1}, PipelineMode::sequential), Error);
  EXPECT_THROW(simulate(1, {-1, 1}, PipelineMode::sequential), Error);
  EXPECT_THROW(parse_pipeline_mode("parallel"), Error);
}

TEST(Pipeline, PrintsPeriod) {
  std::ostringstream os;
  print_trace_table(os, simulate(10, {29, 48}, PipelineMode::pipelined));
  EXPECT_NE(os.str().find("period_ms: 48\n"), std::string::npos);
  EXPECT_NE(os.str().find("throughput_fps: 20.83\n"), std::string::npos);
}

namespace {
// One box per frame, centered in view, no background: the only points are
// the object's own.
std::vector<Frame> centered_frames(int n, std::uint64_t seed) {
  fvx::testing::Gen g(seed);
  std::vector<Frame> frames;
  while (static_cast<int>(frames.size()) < n) {
    scene::SceneSpec spec;
    spec.background.clear();
    spec.seed = seed + frames.size();
    const double y = g.uni(2.5, 4.0);
    const double h = g.uni(0.4, 0.9);
    spec.objects = {{"chair", OrientedBox3({g.uni(-0.2, 0.2), y, 0.5 * h}, g.uni(0.3, 0.6), g.uni(0.3, 0.6), h,
                                           g.uni(-0.4, 0.4)),
                     600.0}};
    auto f = scene::render(spec).to_frame();
    if (!f.objects.empty()) frames.push_back(std::move(f));
  }
  return frames;
}

ScaleLookup medium_short() {
  return [](const ObjectSample&) { return scale_spec(ScaleName::medium_short); };
}
}  // namespace

TEST(Stale, ZeroDriftMatchesRecallReport) {
  const auto frames = centered_frames(20, 11);
  const std::vector<double> drifts{0.0};
  const auto rows = stale_frustum_experiment(frames, drifts, medium_short());
  std::vector<std::pair<OrientedBox3, Aabb3>> pairs;
  for (const auto& f : frames) {
    for (const auto& o : f.objects) {
      const auto c = candidate_centers(f.cloud, o.rect, f.intrinsics, f.pose, 1, 1, CenterMode::average);
      pairs.emplace_back(o.box, best_cropbox(o.box, c, scale_spec(ScaleName::medium_short)).crop);
    }
  }
  const auto ref = recall_report(pairs, 0.9, 0.9);
  EXPECT_EQ(rows[0].recall.n_pos_volume, ref.n_pos_volume);
  EXPECT_EQ(rows[0].recall.n_pos_xy, ref.n_pos_xy);
  EXPECT_EQ(rows[0].recall.n_pos_z, ref.n_pos_z);
  EXPECT_EQ(rows[0].recall.recall_volume, ref.recall_volume);
}

TEST(Stale, DegradesWithDriftAndVanishesAtFullWidth) {
  const auto frames = centered_frames(30, 12);
  std::vector<double> drifts;
  for (int i = 0; i <= 10; ++i) drifts.push_back(0.1 * i);
  const auto rows = stale_frustum_experiment(frames, drifts, medium_short());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LE(rows[i].mean_ioi_3d, rows[i - 1].mean_ioi_3d + 1e-12) << "drift " << rows[i].drift;
  }
  EXPECT_GT(rows.front().recall.recall_volume, 0.5);
  EXPECT_EQ(rows.back().recall.recall_volume, 0.0);
  EXPECT_EQ(rows.back().mean_ioi_3d, 0.0);
}

TEST(Stale, RejectsEmptyAndNegative) {
  const std::vector<Frame> none;
  const std::vector<double> d{0.0};
  EXPECT_THROW(stale_frustum_experiment(none, d, medium_short()), Error);
  const auto frames = centered_frames(1, 3);
  const std::vector<double> neg{-0.1};
  EXPECT_THROW(stale_frustum_experiment(frames, neg, medium_short()), Error);
}
