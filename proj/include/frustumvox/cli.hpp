#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "frustumvox/cropbox.hpp"
#include "frustumvox/dhs.hpp"
#include "frustumvox/error.hpp"
#include "frustumvox/eval.hpp"
#include "frustumvox/head.hpp"
#include "frustumvox/manifest.hpp"
#include "frustumvox/netshape.hpp"
#include "frustumvox/parallel.hpp"
#include "frustumvox/pipesim.hpp"
#include "frustumvox/rng.hpp"
#include "frustumvox/scale.hpp"
#include "frustumvox/scenegen.hpp"
#include "frustumvox/voxel.hpp"

namespace fvx::cli {

enum ExitCode : int { ok = 0, usage = 2, io_error = 3, infeasible = 4, invariant = 5 };

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument: return usage;
    case ErrorCode::io:
    case ErrorCode::format: return io_error;
    case ErrorCode::invariant_violation: return invariant;
    default: return infeasible;
  }
}

// ---------------------------------------------------------------------------
// Shared helpers

/// Scale network per category, chosen from its anchor.
inline ScaleLookup scale_lookup(const AnchorTable& anchors) {
  return [anchors](const ObjectSample& o) {
    auto it = anchors.find(o.category);
    require(it != anchors.end(), "no anchor for category '" + o.category + "'", ErrorCode::format);
    return scale_spec(assign_scale(it->second.a_w, it->second.a_d, it->second.a_h));
  };
}

inline std::vector<double> parse_number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(used == item.size(), "bad number '" + item + "' in " + what);
    } catch (const std::logic_error&) {
      fail(ErrorCode::invalid_argument, "bad number '" + item + "' in " + what);
    }
  }
  require(!out.empty(), what + " is empty");
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) f.push_back(item);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

inline double to_number(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  fail(ErrorCode::format, where + ": bad number '" + s + "'");
}

// Size-search config keys, all optional:
//   sides [..] | side_range [lo, hi, step]    default side_range [0.5, 5.0, 0.1]
//   heights [..] | height_range [lo, hi, step] default height_range [0.5, 3.0, 0.1]
//   threshold_xy 0.9, threshold_z 0.9, target_xy 0.9, target_z 0.95,
//   subdivisions [[1,1],[3,3],[5,5]], modes ["average","median"],
//   near 0.1, far 10, threads 0, categories [] (all)
struct CurveConfig {
  SizeSearchConfig search;
  std::vector<CenterMode> modes{CenterMode::average, CenterMode::median};
  std::vector<std::string> categories;
};

inline CurveConfig curve_config_from_json(const nlohmann::json& j) {
  using namespace jsonio;
  CurveConfig c;
  c.search.side_candidates = SizeSearchConfig::range_of(0.5, 5.0, 0.1);
  c.search.height_candidates = SizeSearchConfig::range_of(0.5, 3.0, 0.1);
  try {
    check_keys(j, {"sides", "side_range", "heights", "height_range", "threshold_xy", "threshold_z",
                   "target_xy", "target_z", "subdivisions", "modes", "near", "far", "threads",
                   "categories"},
               "curve config");
    auto candidates = [&](const char* list, const char* range, std::vector<double>& out) {
      require(!(j.contains(list) && j.contains(range)),
              std::string("curve config: give either ") + list + " or " + range, ErrorCode::format);
      if (j.contains(list)) out = j[list].get<std::vector<double>>();
      if (j.contains(range)) {
        const auto r = numbers<3>(j[range], range);
        require(r[2] > 0.0 && r[1] >= r[0], std::string("curve config: bad ") + range, ErrorCode::format);
        out = SizeSearchConfig::range_of(r[0], r[1], r[2]);
      }
    };
    candidates("sides", "side_range", c.search.side_candidates);
    candidates("heights", "height_range", c.search.height_candidates);
    c.search.threshold_xy = j.value("threshold_xy", c.search.threshold_xy);
    c.search.threshold_z = j.value("threshold_z", c.search.threshold_z);
    c.search.target_xy = j.value("target_xy", c.search.target_xy);
    c.search.target_z = j.value("target_z", c.search.target_z);
    if (j.contains("subdivisions")) {
      c.search.subdivisions.clear();
      for (const auto& s : j["subdivisions"]) {
        require(s.is_array() && s.size() == 2, "curve config: subdivision must be [rows, cols]",
                ErrorCode::format);
        c.search.subdivisions.push_back({s[0].get<int>(), s[1].get<int>()});
      }
    }
    if (j.contains("modes")) {
      c.modes.clear();
      for (const auto& m : j["modes"]) c.modes.push_back(parse_center_mode(m.get<std::string>()));
    }
    c.search.range.near = j.value("near", c.search.range.near);
    c.search.range.far = j.value("far", c.search.range.far);
    c.search.threads = j.value("threads", c.search.threads);
    c.categories = j.value("categories", c.categories);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, std::string("curve config: ") + e.what());
  }
  try {
    c.search.validate();
  } catch (const Error& e) {
    fail(ErrorCode::format, e.what());
  }
  return c;
}

inline CurveConfig load_curve_config(const std::string& path) {
  return curve_config_from_json(path.empty() ? nlohmann::json::object() : jsonio::read_file(path));
}

inline std::vector<CurveRow> read_curves_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "curves: empty file", ErrorCode::format);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  require(header.size() >= 7 && header[0] == "fr" && header[5] == "recall_xy" && header[6] == "recall_z",
          "curves: unexpected header", ErrorCode::format);
  std::vector<CurveRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = "curves line " + std::to_string(lineno);
    require(f.size() == header.size(), where + ": wrong field count", ErrorCode::format);
    CurveRow r;
    r.subdivision = {static_cast<int>(to_number(f[0], where)), static_cast<int>(to_number(f[1], where))};
    try {
      r.mode = parse_center_mode(f[2]);
    } catch (const Error&) {
      fail(ErrorCode::format, where + ": bad mode");
    }
    r.side = to_number(f[3], where);
    r.height = to_number(f[4], where);
    r.recall_xy = to_number(f[5], where);
    r.recall_z = to_number(f[6], where);
    rows.push_back(r);
  }
  require(!rows.empty(), "curves: no rows", ErrorCode::format);
  return rows;
}

inline std::ofstream open_text_out(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return io::open_out(p, false);
}

inline std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu", i);
  return buf;
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenScenesOpts {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string config;
  std::string scene;
};

// Random-scene config keys: min_objects 1, max_objects 3, size_jitter 0.1,
// density 400, floor true, wall true, wall_distance 6, occlusion true,
// random_yaw true, categories [] (all presets), background_stride 4,
// depth_noise 0.
inline int cmd_gen_scenes(const GenScenesOpts& o, std::ostream& out, std::ostream& err) {
  scene::RandomSceneOptions opt;
  int stride = 4;
  double noise = 0.0;
  if (!o.config.empty()) {
    const auto j = jsonio::read_file(o.config);
    try {
      jsonio::check_keys(j, {"min_objects", "max_objects", "size_jitter", "density", "floor", "wall",
                             "wall_distance", "occlusion", "random_yaw", "categories",
                             "background_stride", "depth_noise"},
                         "scene config");
      opt.min_objects = j.value("min_objects", opt.min_objects);
      opt.max_objects = j.value("max_objects", opt.max_objects);
      opt.size_jitter = j.value("size_jitter", opt.size_jitter);
      opt.density = j.value("density", opt.density);
      opt.floor = j.value("floor", opt.floor);
      opt.wall = j.value("wall", opt.wall);
      opt.wall_distance = j.value("wall_distance", opt.wall_distance);
      opt.occlusion = j.value("occlusion", opt.occlusion);
      opt.random_yaw = j.value("random_yaw", opt.random_yaw);
      opt.categories = j.value("categories", opt.categories);
      stride = j.value("background_stride", stride);
      noise = j.value("depth_noise", noise);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::format, std::string("scene config: ") + e.what());
    }
  }

  std::vector<scene::SceneSpec> specs;
  if (!o.scene.empty()) {
    specs.push_back(scene_from_json(jsonio::read_file(o.scene)));
    specs.back().seed = o.seed;
  } else {
    require(o.count >= 1, "--count must be at least 1");
    Rng seeds(o.seed);
    for (std::size_t i = 0; i < o.count; ++i) {
      auto s = scene::random_scene(seeds.next_u64(), opt);
      s.background_stride = stride;
      s.depth_noise = noise;
      specs.push_back(std::move(s));
    }
  }

  std::vector<scene::RenderedScene> rendered(specs.size(), scene::RenderedScene{
      {}, {}, RangeImage(specs.front().intrinsics, specs.front().pose), {}, false});
  parallel_for(specs.size(), [&](std::size_t i) { rendered[i] = scene::render(specs[i]); });

  const fs::path dir(o.out_dir);
  fs::create_directories(dir / "clouds");
  fs::create_directories(dir / "range");
  Manifest m;
  m.base = dir;
  std::set<std::string> vocab;
  for (const auto& p : scene::category_presets()) vocab.insert(p.category);
  for (const auto& s : specs) {
    for (const auto& ob : s.objects) vocab.insert(ob.category);
  }
  m.vocabulary.assign(vocab.begin(), vocab.end());
  std::size_t excluded = 0, objects = 0;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    const auto& r = rendered[i];
    const fs::path cloud = fs::path("clouds") / (frame_name(i) + ".bin");
    const fs::path range = fs::path("range") / (frame_name(i) + ".bin");
    save_cloud(dir / cloud, r.cloud);
    {
      auto os = io::open_out(dir / range, true);
      write_range_image(os, r.range);
    }
    FrameRecord rec{cloud, range, r.range.intrinsics(), r.range.pose(), {}};
    for (const auto& ob : r.objects) {
      if (ob.rect) {
        rec.objects.push_back({ob.category, *ob.rect, ob.box});
        ++objects;
      } else {
        ++excluded;
        err << "gen-scenes: warning: " << frame_name(i) << " drops a " << ob.category << " ("
            << scene::to_string(ob.status) << ")\n";
      }
    }
    m.frames.push_back(std::move(rec));
  }
  jsonio::write_file(dir / "manifest.json", manifest_to_json(m));
  out << "frames: " << rendered.size() << "\nobjects: " << objects << "\nexcluded: " << excluded
      << "\nmanifest: " << (dir / "manifest.json").string() << '\n';
  return ok;
}

struct DhsOpts {
  std::string manifest;
  std::string out_dir;
  bool planes = false;
  DhsParams params;
};

/// Writes one binary PPM per frame with a range image, optionally the float planes too.
inline int cmd_dhs(const DhsOpts& o, std::ostream& out, std::ostream&) {
  const Manifest m = load_manifest(o.manifest);
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  std::size_t written = 0;
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    if (!m.frames[i].range_image) continue;
    const DhsImage img = depth_to_dhs(load_range(m, m.frames[i]), o.params);
    const auto rgb = dhs_to_rgb8(img);
    auto os = io::open_out(dir / (frame_name(i) + ".ppm"), true);
    os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (o.planes) {
      auto ps = io::open_out(dir / (frame_name(i) + ".dhs"), true);
      write_dhs_planes(ps, img);
    }
    ++written;
  }
  require(written > 0, "dhs: no frame in the manifest has a range image", ErrorCode::empty_input);
  out << "images: " << written << '\n';
  return ok;
}

struct CurvesOpts {
  std::string manifest;
  std::string config;
  std::string out;
};

inline std::vector<CurveRow> compute_curves(const Manifest& m, const CurveConfig& cfg) {
  const auto frames = load_frames(m);
  ObjectFilter filter;
  if (!cfg.categories.empty()) {
    filter = [cats = cfg.categories](const ObjectSample& s) {
      return std::find(cats.begin(), cats.end(), s.category) != cats.end();
    };
  }
  std::vector<CurveRow> rows;
  for (const auto mode : cfg.modes) {
    auto part = recall_curves(frames, cfg.search, mode, filter);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

inline int cmd_recall_curves(const CurvesOpts& o, std::ostream& out, std::ostream&) {
  const auto cfg = load_curve_config(o.config);
  const auto rows = compute_curves(load_manifest(o.manifest), cfg);
  for (const auto& r : rows) {
    require(r.bound_satisfied(), "volumetric recall fell below its lower bound at side " +
                                     std::to_string(r.side) + ", height " + std::to_string(r.height),
            ErrorCode::invariant_violation);
  }
  auto os = open_text_out(o.out);
  write_curves_csv(os, rows);
  out << "rows: " << rows.size() << '\n';
  return ok;
}

struct SelectOpts {
  std::string curves;
  std::string manifest;
  std::string config;
  std::string out;
  int fr = 1, fc = 1;
  std::string mode = "average";
};

inline int cmd_select_size(const SelectOpts& o, std::ostream& out, std::ostream&) {
  const auto cfg = load_curve_config(o.config);
  std::vector<CurveRow> rows;
  if (!o.curves.empty()) {
    auto is = io::open_in(o.curves, false);
    rows = read_curves_csv(is);
  } else {
    require(!o.manifest.empty(), "select-size needs --curves or --manifest");
    rows = compute_curves(load_manifest(o.manifest), cfg);
  }
  const auto chosen = filter_curves(rows, {o.fr, o.fc}, parse_center_mode(o.mode));
  require(!chosen.empty(), "no curve rows for the requested subdivision and mode",
          ErrorCode::empty_input);
  const auto sel = select_min_size(chosen, cfg.search.target_xy, cfg.search.target_z);
  std::ostringstream csv;
  csv << std::setprecision(10)
      << "fr,fc,mode,side_m,height_m,recall_xy,recall_z,guaranteed_volume_recall,achieved_volume_bound\n"
      << o.fr << ',' << o.fc << ',' << o.mode << ',' << sel.side << ',' << sel.height << ','
      << sel.recall_xy << ',' << sel.recall_z << ',' << sel.guaranteed_volume_recall << ','
      << sel.achieved_volume_bound << '\n';
  if (o.out.empty()) {
    out << csv.str();
  } else {
    auto os = open_text_out(o.out);
    os << csv.str();
  }
  return ok;
}

struct VoxelizeOpts {
  std::string manifest;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string phase = "inference";
  bool augment = false;
  bool sparse = false;
  std::optional<std::size_t> frame;
};

/// One grid per object: crop from the double frustum, scale from the anchors.
inline int cmd_voxelize(const VoxelizeOpts& o, std::ostream& out, std::ostream& err) {
  const Manifest m = load_manifest(o.manifest);
  const auto lookup = scale_lookup(manifest_anchors(m));
  require(o.phase == "train" || o.phase == "inference", "--phase must be train or inference");
  const Phase phase = o.phase == "train" ? Phase::train : Phase::inference;
  if (o.frame) require(*o.frame < m.frames.size(), "--frame is out of range");

  struct Job {
    std::size_t frame, object;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  Rng seeds(o.seed);
  for (std::size_t f = 0; f < m.frames.size(); ++f) {
    for (std::size_t k = 0; k < m.frames[f].objects.size(); ++k) {
      const std::uint64_t s = seeds.next_u64();
      if (!o.frame || *o.frame == f) jobs.push_back({f, k, s});
    }
  }
  require(!jobs.empty(), "voxelize: no objects selected", ErrorCode::empty_input);

  struct Result {
    std::optional<VoxelGrid> grid;
    ScaleSpec spec;
    Aabb3 crop{{0, 0, 0}, 1, 1};
    std::size_t points = 0;
    std::string error;
  };
  std::vector<Result> results(jobs.size());
  std::map<std::size_t, Frame> frames;
  for (const auto& j : jobs) {
    if (!frames.contains(j.frame)) frames.emplace(j.frame, load_frame(m, m.frames[j.frame]));
  }
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& j = jobs[i];
    const Frame& f = frames.at(j.frame);
    const ObjectSample& obj = f.objects[j.object];
    Result& r = results[i];
    r.spec = lookup(obj);
    try {
      auto prop = propose_crop(f.cloud, obj.rect, f.intrinsics, f.pose, r.spec, phase, j.seed);
      PointCloud pts = std::move(prop.points);
      if (o.augment) pts = augment(pts, prop.crop, j.seed ^ 0xA5A5A5A5ull).cloud;
      r.crop = prop.crop;
      r.points = pts.size();
      r.grid = voxelize(pts, prop.crop, r.spec);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::no_center) throw;
      r.error = e.what();
    }
  });

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  auto index = io::open_out(dir / "index.csv", false);
  index << std::setprecision(10)
        << "frame,object,category,scale,crop_x,crop_y,crop_z,crop_side,crop_height,points,occupied,file\n";
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& j = jobs[i];
    const auto& r = results[i];
    const auto& obj = m.frames[j.frame].objects[j.object];
    if (!r.grid) {
      err << "voxelize: warning: frame " << j.frame << " object " << j.object << ": " << r.error << '\n';
      ++skipped;
      continue;
    }
    const std::string name = frame_name(j.frame) + "_obj" + std::to_string(j.object);
    {
      auto gs = io::open_out(dir / (name + ".grid"), true);
      write_grid(gs, *r.grid);
    }
    if (o.sparse) {
      auto cs = io::open_out(dir / (name + ".csv"), false);
      write_grid_sparse_csv(cs, *r.grid);
    }
    std::size_t occupied = 0;
    for (auto c : r.grid->data()) occupied += c > 0;
    const Point3 c = r.crop.center();
    index << j.frame << ',' << j.object << ',' << obj.category << ',' << to_string(r.spec.name) << ','
          << c.x << ',' << c.y << ',' << c.z << ',' << r.crop.side() << ',' << r.crop.height() << ','
          << r.points << ',' << occupied << ',' << name << ".grid\n";
  }
  out << "grids: " << jobs.size() - skipped << "\nskipped: " << skipped << '\n';
  return ok;
}

struct AnchorsOpts {
  std::string manifest;
  std::string out;
};

inline int cmd_anchors(const AnchorsOpts& o, std::ostream& out, std::ostream&) {
  const Manifest m = load_manifest(o.manifest);
  std::map<std::string, std::vector<OrientedBox3>> boxes;
  for (const auto& r : m.frames) {
    for (const auto& ob : r.objects) boxes[ob.category].push_back(ob.box);
  }
  require(!boxes.empty(), "anchors: manifest has no objects", ErrorCode::empty_input);
  const auto anchors = compute_anchors(boxes);
  auto os = open_text_out(o.out);
  write_anchors_csv(os, anchors);
  out << std::left << std::setw(14) << "category" << std::setw(8) << "count" << "scale\n";
  for (const auto& [cat, a] : anchors) {
    std::string scale;
    try {
      scale = std::string(to_string(assign_scale(a.a_w, a.a_d, a.a_h)));
    } catch (const Error& e) {
      scale = "unsupported";
    }
    out << std::setw(14) << cat << std::setw(8) << boxes[cat].size() << scale << '\n';
  }
  return ok;
}

struct EncodeCheckOpts {
  std::string manifest;
  std::string out;
  std::uint64_t seed = 0;
  double noise = 0.1;
};

/// Round-trips every object through encode/decode against its inference crop
/// and gradient-checks the loss at a perturbed prediction.
inline int cmd_encode_check(const EncodeCheckOpts& o, std::ostream& out, std::ostream&) {
  const Manifest m = load_manifest(o.manifest);
  const auto anchors = manifest_anchors(m);
  const auto lookup = scale_lookup(anchors);
  Rng rng(o.seed);
  auto os = open_text_out(o.out);
  os << std::setprecision(6)
     << "frame,object,category,status,roundtrip_error,grad_rel_error\n";
  std::size_t checked = 0, outside = 0;
  double worst_rt = 0.0, worst_fd = 0.0;
  for (std::size_t f = 0; f < m.frames.size(); ++f) {
    const Frame frame = load_frame(m, m.frames[f]);
    for (std::size_t k = 0; k < frame.objects.size(); ++k) {
      const auto& obj = frame.objects[k];
      const Anchor& a = anchors.at(obj.category);
      std::string status = "ok";
      double rt = 0.0, fd = 0.0;
      try {
        const auto prop = propose_crop(frame.cloud, obj.rect, frame.intrinsics, frame.pose,
                                       lookup(obj), Phase::inference, 0);
        const HeadVector v = encode(obj.box, prop.crop, a);
        const OrientedBox3 back = decode(v, prop.crop, a);
        rt = std::max({norm(back.center() - obj.box.center()), std::abs(back.width() - obj.box.width()),
                       std::abs(back.depth() - obj.box.depth()),
                       std::abs(back.height() - obj.box.height()),
                       std::abs(normalize_angle(back.yaw() - obj.box.yaw()))});
        auto p = v.to_array();
        for (auto& x : p) x += rng.normal(0.0, o.noise);
        fd = fd_check(HeadVector::from_array(p), v, LossWeights{});
        ++checked;
        worst_rt = std::max(worst_rt, rt);
        worst_fd = std::max(worst_fd, fd);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::encode_domain && e.code() != ErrorCode::no_center) throw;
        status = e.code() == ErrorCode::encode_domain ? "center_outside_crop" : "no_points";
        ++outside;
      }
      os << f << ',' << k << ',' << obj.category << ',' << status << ',' << rt << ',' << fd << '\n';
    }
  }
  out << "checked: " << checked << "\nskipped: " << outside << "\nmax_roundtrip_error: " << worst_rt
      << "\nmax_grad_rel_error: " << worst_fd << '\n';
  require(worst_rt <= 1e-9, "encode/decode round trip exceeded 1e-9", ErrorCode::invariant_violation);
  require(worst_fd < 1e-4, "loss gradient disagrees with finite differences",
          ErrorCode::invariant_violation);
  return ok;
}

struct EvaluateOpts {
  std::string manifest;
  std::string detections;
  std::string out;
  std::string hist_out;
  std::string centers_out;
  double iou = kDefaultIouThreshold;
  std::size_t bins = 10;
};

// Detections CSV: frame,category,score,x,y,z,w,d,h,yaw
inline std::vector<std::vector<Detection>> read_detections_csv(std::istream& is, std::size_t n_frames) {
  std::vector<std::vector<Detection>> out(n_frames);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "detections: empty file", ErrorCode::format);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "frame,category,score,x,y,z,w,d,h,yaw", "detections: unexpected header",
          ErrorCode::format);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "detections line " + std::to_string(lineno);
    const auto f = split_csv_line(line);
    require(f.size() == 10, where + ": expected 10 fields", ErrorCode::format);
    const double fr = to_number(f[0], where);
    require(fr >= 0 && fr < static_cast<double>(n_frames) && fr == std::floor(fr),
            where + ": frame out of range", ErrorCode::format);
    double v[7];
    for (int i = 0; i < 7; ++i) v[i] = to_number(f[3 + i], where);
    try {
      out[static_cast<std::size_t>(fr)].push_back(
          {OrientedBox3({v[0], v[1], v[2]}, v[3], v[4], v[5], v[6]), f[1], to_number(f[2], where)});
    } catch (const Error& e) {
      fail(ErrorCode::format, where + ": " + e.what());
    }
  }
  return out;
}

inline int cmd_evaluate(const EvaluateOpts& o, std::ostream& out, std::ostream&) {
  const Manifest m = load_manifest(o.manifest);
  auto is = io::open_in(o.detections, false);
  const auto dets = read_detections_csv(is, m.frames.size());
  std::vector<FrameDetections> frames;
  for (std::size_t f = 0; f < m.frames.size(); ++f) {
    FrameDetections fd;
    for (const auto& ob : m.frames[f].objects) {
      fd.gts.push_back(ob.box);
      fd.gt_categories.push_back(ob.category);
    }
    fd.detections = dets[f];
    frames.push_back(std::move(fd));
  }
  const auto rows = evaluate(frames, o.iou, o.bins);
  {
    auto os = open_text_out(o.out);
    write_evaluation_csv(os, rows);
  }
  if (!o.hist_out.empty()) {
    auto os = open_text_out(o.hist_out);
    write_histogram_csv(os, rows, false);
    auto os2 = open_text_out(fs::path(o.hist_out).replace_extension(".orientation.csv").string());
    write_histogram_csv(os2, rows, true);
  }
  if (!o.centers_out.empty()) {
    // Predicted centers come from the detection matched to each gt.
    std::vector<Frame> loaded = load_frames(m);
    std::vector<CenterComparisonItem> items;
    for (std::size_t f = 0; f < m.frames.size(); ++f) {
      std::map<std::string, std::vector<std::size_t>> by_cat;
      for (std::size_t k = 0; k < m.frames[f].objects.size(); ++k) {
        by_cat[m.frames[f].objects[k].category].push_back(k);
      }
      for (const auto& [cat, idx] : by_cat) {
        std::vector<Detection> cd;
        for (const auto& d : dets[f]) {
          if (d.category == cat) cd.push_back(d);
        }
        std::vector<OrientedBox3> gts;
        for (auto k : idx) gts.push_back(m.frames[f].objects[k].box);
        const auto mr = match(cd, gts, o.iou);
        std::vector<std::optional<Point3>> pred(idx.size());
        for (const auto& p : mr.pairs) pred[p.gt] = cd[p.detection].box.center();
        for (std::size_t g = 0; g < idx.size(); ++g) {
          const auto& ob = m.frames[f].objects[idx[g]];
          items.push_back({cat, ob.box, &loaded[f].cloud, ob.rect, m.frames[f].intrinsics,
                           m.frames[f].pose, pred[g]});
        }
      }
    }
    auto os = open_text_out(o.centers_out);
    write_center_comparison_csv(os, center_baseline_compare(items));
  }
  out << "categories: " << rows.size() << '\n';
  return ok;
}

struct PipesimOpts {
  double t2d = 0.0, t3d = 0.0;
  std::string mode = "pipelined";
  int frames = 10;
  std::string csv;
};

inline int cmd_pipesim(const PipesimOpts& o, std::ostream& out, std::ostream&) {
  const auto tr = simulate(o.frames, {o.t2d, o.t3d}, parse_pipeline_mode(o.mode));
  print_trace_table(out, tr);
  if (!o.csv.empty()) {
    auto os = open_text_out(o.csv);
    write_trace_csv(os, tr);
  }
  return ok;
}

struct StaleOpts {
  std::string manifest;
  std::string drifts = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
  std::string out;
  double threshold_xy = 0.9, threshold_z = 0.9;
};

inline int cmd_stale_sweep(const StaleOpts& o, std::ostream& out, std::ostream&) {
  const Manifest m = load_manifest(o.manifest);
  const auto drifts = parse_number_list(o.drifts, "--drifts");
  const auto frames = load_frames(m);
  const auto rows = stale_frustum_experiment(frames, drifts, scale_lookup(manifest_anchors(m)),
                                             o.threshold_xy, o.threshold_z);
  auto os = open_text_out(o.out);
  write_stale_csv(os, rows);
  out << "drifts: " << rows.size() << '\n';
  return ok;
}

struct NetshapeOpts {
  std::string plan;
  std::string scale;
  int categories = 10;
};

inline int cmd_netshape_check(const NetshapeOpts& o, std::ostream& out, std::ostream&) {
  std::vector<net::ShapePlan> plans;
  if (!o.plan.empty()) {
    plans.push_back(net::plan_from_json(jsonio::read_file(o.plan)));
  } else if (!o.scale.empty()) {
    plans.push_back(net::default_plan(scale_spec(parse_scale(o.scale)).grid, o.categories));
  } else {
    for (auto s : kAllScales) plans.push_back(net::default_plan(scale_spec(s).grid, o.categories));
  }
  for (const auto& p : plans) {
    net::print_shape_table(out, p);
    out << '\n';
  }
  return ok;
}

// ---------------------------------------------------------------------------

/// Parses argv, runs one subcommand and maps failures to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Frustum-based 3D detection toolkit: crop search, voxelization, evaluation and timing."};
  app.name("frustumvox");
  app.require_subcommand(1);

  GenScenesOpts gen;
  auto* c_gen = app.add_subcommand("gen-scenes", "Render synthetic scenes and write a manifest");
  c_gen->add_option("--count", gen.count, "Number of random scenes");
  c_gen->add_option("--seed", gen.seed, "RNG seed")->required();
  c_gen->add_option("--out", gen.out_dir, "Output directory")->required();
  c_gen->add_option("--config", gen.config, "Random-scene options (JSON)");
  c_gen->add_option("--scene", gen.scene, "Render one explicit scene spec (JSON) instead");

  DhsOpts dhs;
  auto* c_dhs = app.add_subcommand("dhs", "Encode range images as DHS images");
  c_dhs->add_option("--manifest", dhs.manifest)->required();
  c_dhs->add_option("--dhs-out", dhs.out_dir, "Output directory")->required();
  c_dhs->add_flag("--planes", dhs.planes, "Also write float D/H/S planes");
  c_dhs->add_option("--d-max", dhs.params.d_max, "Depth normalizer (m)");
  c_dhs->add_option("--h-min", dhs.params.h_min, "Lowest height (m)");
  c_dhs->add_option("--h-max", dhs.params.h_max, "Highest height (m)");

  CurvesOpts curves;
  auto* c_curves = app.add_subcommand("recall-curves", "Recall versus crop size");
  c_curves->add_option("--manifest", curves.manifest)->required();
  c_curves->add_option("--config", curves.config, "Size-search config (JSON)");
  c_curves->add_option("--out", curves.out, "CSV output")->required();

  SelectOpts sel;
  auto* c_sel = app.add_subcommand("select-size", "Smallest crop meeting the recall targets");
  c_sel->add_option("--curves", sel.curves, "CSV from recall-curves");
  c_sel->add_option("--manifest", sel.manifest, "Compute curves from this manifest instead");
  c_sel->add_option("--config", sel.config, "Size-search config (JSON)");
  c_sel->add_option("--fr", sel.fr, "Subdivision rows");
  c_sel->add_option("--fc", sel.fc, "Subdivision columns");
  c_sel->add_option("--mode", sel.mode, "average or median");
  c_sel->add_option("--out", sel.out, "CSV output (default stdout)");

  VoxelizeOpts vox;
  std::size_t vox_frame = 0;
  auto* c_vox = app.add_subcommand("voxelize", "Voxelize each object's crop");
  c_vox->add_option("--manifest", vox.manifest)->required();
  c_vox->add_option("--out", vox.out_dir, "Output directory")->required();
  c_vox->add_option("--seed", vox.seed, "RNG seed")->required();
  c_vox->add_option("--phase", vox.phase, "train or inference");
  c_vox->add_flag("--augment", vox.augment, "Rotate and jitter points before voxelizing");
  c_vox->add_flag("--sparse", vox.sparse, "Also write sparse CSV grids");
  auto* vox_frame_opt = c_vox->add_option("--frame", vox_frame, "Only this frame index");

  AnchorsOpts anc;
  auto* c_anc = app.add_subcommand("anchors", "Per-category mean box sizes");
  c_anc->add_option("--manifest", anc.manifest)->required();
  c_anc->add_option("--out", anc.out, "CSV output")->required();

  EncodeCheckOpts enc;
  auto* c_enc = app.add_subcommand("encode-check", "Round-trip and gradient-check the box head");
  c_enc->add_option("--manifest", enc.manifest)->required();
  c_enc->add_option("--out", enc.out, "CSV output")->required();
  c_enc->add_option("--seed", enc.seed, "RNG seed")->required();
  c_enc->add_option("--noise", enc.noise, "Prediction perturbation sigma");

  EvaluateOpts ev;
  auto* c_ev = app.add_subcommand("evaluate", "AP and center/size metrics of detections");
  c_ev->add_option("--manifest", ev.manifest)->required();
  c_ev->add_option("--detections", ev.detections, "CSV frame,category,score,x,y,z,w,d,h,yaw")->required();
  c_ev->add_option("--out", ev.out, "CSV output")->required();
  c_ev->add_option("--hist-out", ev.hist_out, "IoU histogram CSV (orientation goes alongside)");
  c_ev->add_option("--centers-out", ev.centers_out, "Center source comparison CSV");
  c_ev->add_option("--iou", ev.iou, "IoU threshold");
  c_ev->add_option("--bins", ev.bins, "Histogram bins");

  PipesimOpts ps;
  auto* c_ps = app.add_subcommand("pipesim", "Two-stage detector timing");
  c_ps->add_option("--t2d", ps.t2d, "2D stage time (ms)")->required();
  c_ps->add_option("--t3d", ps.t3d, "3D stage time (ms)")->required();
  c_ps->add_option("--mode", ps.mode, "sequential or pipelined");
  c_ps->add_option("--frames", ps.frames, "Frames to simulate");
  c_ps->add_option("--csv", ps.csv, "Per-frame trace CSV");

  StaleOpts st;
  auto* c_st = app.add_subcommand("stale-sweep", "Crop quality under stale 2D detections");
  c_st->add_option("--manifest", st.manifest)->required();
  c_st->add_option("--drifts", st.drifts, "Comma-separated drifts, fractions of rect width");
  c_st->add_option("--out", st.out, "CSV output")->required();
  c_st->add_option("--threshold-xy", st.threshold_xy);
  c_st->add_option("--threshold-z", st.threshold_z);

  NetshapeOpts ns;
  auto* c_ns = app.add_subcommand("netshape", "Network shape plans");
  auto* c_ns_check = c_ns->add_subcommand("check", "Propagate shapes and print the table");
  c_ns->require_subcommand(1);
  c_ns_check->add_option("--plan", ns.plan, "Plan JSON");
  c_ns_check->add_option("--scale", ns.scale, "Default plan for one scale");
  c_ns_check->add_option("--categories", ns.categories, "Number of categories");

  if (argc <= 1) {
    err << app.help();
    return usage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "frustumvox: " << e.what() << '\n';
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return usage;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (c_gen->parsed()) return cmd_gen_scenes(gen, out, err);
    if (c_dhs->parsed()) return cmd_dhs(dhs, out, err);
    if (c_curves->parsed()) return cmd_recall_curves(curves, out, err);
    if (c_sel->parsed()) return cmd_select_size(sel, out, err);
    if (c_vox->parsed()) {
      if (vox_frame_opt->count() > 0) vox.frame = vox_frame;
      return cmd_voxelize(vox, out, err);
    }
    if (c_anc->parsed()) return cmd_anchors(anc, out, err);
    if (c_enc->parsed()) return cmd_encode_check(enc, out, err);
    if (c_ev->parsed()) return cmd_evaluate(ev, out, err);
    if (c_ps->parsed()) return cmd_pipesim(ps, out, err);
    if (c_st->parsed()) return cmd_stale_sweep(st, out, err);
    if (c_ns_check->parsed()) return cmd_netshape_check(ns, out, err);
  } catch (const Error& e) {
    err << "frustumvox " << stage << ": error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "frustumvox " << stage << ": error: " << e.what() << '\n';
    return io_error;
  }
  err << "frustumvox: no subcommand ran\n";
  return usage;
}

}  // namespace fvx::cli
