#pragma once

#include <algorithm>
#include <functional>
#include <iomanip>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "frustumvox/cropbox.hpp"
#include "frustumvox/dataset.hpp"
#include "frustumvox/error.hpp"
#include "frustumvox/recall.hpp"
#include "frustumvox/scale.hpp"

namespace fvx {

struct StageTiming {
  double t_2d = 0.0;  // ms
  double t_3d = 0.0;  // ms
};

enum class PipelineMode { sequential, pipelined };

inline std::string_view to_string(PipelineMode m) {
  return m == PipelineMode::sequential ? "sequential" : "pipelined";
}

inline PipelineMode parse_pipeline_mode(std::string_view s) {
  if (s == "sequential") return PipelineMode::sequential;
  if (s == "pipelined") return PipelineMode::pipelined;
  fail(ErrorCode::invalid_argument, "unknown pipeline mode '" + std::string(s) + "'");
}

struct FrameTiming {
  double start = 0.0;    // capture; the frame's 2D stage begins
  double done_2d = 0.0;
  double start_3d = 0.0;
  double done_3d = 0.0;
  int staleness = 0;     // age in frames of the 2D result the 3D stage used

  double latency() const { return done_3d - start; }
};

struct PipelineSummary {
  double period = 0.0;          // steady-state ms between completed frames
  double throughput_fps = 0.0;  // 1000 / period
  double first_latency = 0.0;   // ms, frame 1
  double steady_latency = 0.0;  // ms, capture-to-result of the last frame
  double total_time = 0.0;      // ms until both stages drain
};

struct FrameTrace {
  PipelineMode mode = PipelineMode::sequential;
  StageTiming timing;
  std::vector<FrameTiming> frames;
  PipelineSummary summary;
};

/// Event model of the two-stage detector. Sequential runs 2D then 3D per
/// frame. Pipelined gives the 2D unit one slot of max(t_2d, t_3d) per frame;
/// frame n's 3D stage starts once frame n-1's 2D result exists, the 3D unit
/// is free and frame n has been captured. Frame 1 has no earlier 2D result
/// and waits for its own.
inline FrameTrace simulate(int n_frames, const StageTiming& timing, PipelineMode mode) {
  require(n_frames >= 1, "simulate: need at least one frame");
  require(timing.t_2d >= 0.0 && timing.t_3d >= 0.0, "simulate: stage times must be non-negative");
  FrameTrace tr{mode, timing, {}, {}};
  tr.frames.reserve(static_cast<std::size_t>(n_frames));
  const double t2 = timing.t_2d, t3 = timing.t_3d;
  const double slot = std::max(t2, t3);
  for (int n = 0; n < n_frames; ++n) {
    FrameTiming f;
    if (mode == PipelineMode::sequential) {
      f.start = n == 0 ? 0.0 : tr.frames.back().done_3d;
      f.done_2d = f.start + t2;
      f.start_3d = f.done_2d;
      f.done_3d = f.start_3d + t3;
    } else {
      f.start = n * slot;
      f.done_2d = f.start + t2;
      if (n == 0) {
        f.start_3d = f.done_2d;
      } else {
        const FrameTiming& prev = tr.frames.back();
        f.start_3d = std::max({prev.done_2d, prev.done_3d, f.start});
        f.staleness = 1;
      }
      f.done_3d = f.start_3d + t3;
    }
    tr.frames.push_back(f);
  }
  auto& s = tr.summary;
  s.period = mode == PipelineMode::sequential ? t2 + t3 : slot;
  s.throughput_fps = s.period > 0.0 ? 1000.0 / s.period : 0.0;
  s.first_latency = tr.frames.front().latency();
  s.steady_latency = tr.frames.back().latency();
  for (const auto& f : tr.frames) s.total_time = std::max({s.total_time, f.done_2d, f.done_3d});
  return tr;
}

inline void print_trace_table(std::ostream& os, const FrameTrace& tr) {
  os << "mode: " << to_string(tr.mode) << "  t_2d=" << tr.timing.t_2d
     << " ms  t_3d=" << tr.timing.t_3d << " ms\n";
  os << std::setw(6) << "frame" << std::setw(10) << "start" << std::setw(10) << "2d_done"
     << std::setw(10) << "3d_start" << std::setw(10) << "3d_done" << std::setw(10) << "latency"
     << std::setw(7) << "stale" << '\n';
  for (std::size_t i = 0; i < tr.frames.size(); ++i) {
    const auto& f = tr.frames[i];
    os << std::setw(6) << i + 1 << std::setw(10) << f.start << std::setw(10) << f.done_2d
       << std::setw(10) << f.start_3d << std::setw(10) << f.done_3d << std::setw(10)
       << f.latency() << std::setw(7) << f.staleness << '\n';
  }
  const auto& s = tr.summary;
  os << "period_ms: " << s.period << '\n'
     << "throughput_fps: " << std::fixed << std::setprecision(2) << s.throughput_fps
     << std::defaultfloat << std::setprecision(6) << '\n'
     << "first_latency_ms: " << s.first_latency << '\n'
     << "steady_latency_ms: " << s.steady_latency << '\n'
     << "total_ms: " << s.total_time << '\n';
}

inline void write_trace_csv(std::ostream& os, const FrameTrace& tr) {
  os << "frame,mode,start_ms,done_2d_ms,start_3d_ms,done_3d_ms,latency_ms,staleness\n";
  for (std::size_t i = 0; i < tr.frames.size(); ++i) {
    const auto& f = tr.frames[i];
    os << i + 1 << ',' << to_string(tr.mode) << ',' << f.start << ',' << f.done_2d << ','
       << f.start_3d << ',' << f.done_3d << ',' << f.latency() << ',' << f.staleness << '\n';
  }
}

// ---------------------------------------------------------------------------
// Stale frustums

struct StaleRow {
  double drift = 0.0;  // fraction of the rect width
  double mean_ioi_3d = 0.0;
  RecallReport recall;
};

using ScaleLookup = std::function<ScaleSpec(const ObjectSample&)>;

/// Shifts every rect horizontally by each drift, given as a fraction of the
/// rect's width (a one-frame-old detection under motion), rebuilds the crop from a 1x1 average
/// center and reports the IoI and recall it still achieves. Objects whose
/// shifted frustum holds no points score zero.
inline std::vector<StaleRow> stale_frustum_experiment(std::span<const Frame> frames,
                                                      std::span<const double> drifts,
                                                      const ScaleLookup& scale_of,
                                                      double threshold_xy = 0.90,
                                                      double threshold_z = 0.90,
                                                      DepthRange range = {}) {
  std::size_t n_objects = 0;
  for (const auto& f : frames) n_objects += f.objects.size();
  require(n_objects > 0, "stale sweep: empty dataset", ErrorCode::empty_input);
  std::vector<StaleRow> rows;
  for (double drift : drifts) {
    require(drift >= 0.0, "stale sweep: drift must be non-negative");
    RecallAccumulator acc(threshold_xy, threshold_z);
    double sum = 0.0;
    for (const auto& f : frames) {
      for (const auto& o : f.objects) {
        const Rect2 rect = o.rect.shifted(drift * o.rect.width(), 0.0);
        IoiBreakdown v;
        try {
          const auto cands =
              candidate_centers(f.cloud, rect, f.intrinsics, f.pose, 1, 1, CenterMode::average, range);
          v = best_cropbox(o.box, cands, scale_of(o)).ioi;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::no_candidates) throw;
        }
        acc.add(v);
        sum += v.ioi_3d;
      }
    }
    rows.push_back({drift, sum / static_cast<double>(n_objects), acc.finish()});
  }
  return rows;
}

inline void write_stale_csv(std::ostream& os, std::span<const StaleRow> rows) {
  os << "drift_frac,mean_ioi_3d,recall_volume,recall_xy,recall_z\n";
  auto old = os.precision(10);
  for (const auto& r : rows) {
    os << r.drift << ',' << r.mean_ioi_3d << ',' << r.recall.recall_volume << ','
       << r.recall.recall_xy << ',' << r.recall.recall_z << '\n';
  }
  os.precision(old);
}

}  // namespace fvx
