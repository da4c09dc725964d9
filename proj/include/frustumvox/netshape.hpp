#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "frustumvox/error.hpp"
#include "frustumvox/rng.hpp"
#include "frustumvox/scale.hpp"
#include "frustumvox/voxel.hpp"

namespace fvx::net {

enum class LayerKind { conv3d, pool3d, dropout, global_reduce, dense };
enum class Padding { same, valid };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv3d: return "conv3d";
    case LayerKind::pool3d: return "pool3d";
    case LayerKind::dropout: return "dropout";
    case LayerKind::global_reduce: return "global_reduce";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

using Triple = std::array<int, 3>;

struct LayerSpec {
  LayerKind kind = LayerKind::conv3d;
  Triple kernel{1, 1, 1};
  Triple stride{1, 1, 1};
  int channels_out = 0;
  Padding padding = Padding::same;

  bool has_weights() const { return kind == LayerKind::conv3d || kind == LayerKind::dense; }
};

struct TensorShape {
  int w = 1, d = 1, h = 1, c = 1;

  std::int64_t flat() const { return std::int64_t{w} * d * h * c; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

struct ShapePlan {
  TensorShape input;
  std::vector<LayerSpec> layers;
  std::vector<TensorShape> outputs;  // one per layer
  std::int64_t final_length = 0;
};

namespace detail {

inline std::string layer_name(std::size_t i, const LayerSpec& l) {
  return "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
}

inline int spatial_out(int in, int k, int s, Padding p, std::size_t i, const LayerSpec& l) {
  if (p == Padding::same) return (in + s - 1) / s;
  if (in < k) {
    fail(ErrorCode::shape_mismatch, layer_name(i, l) + ": kernel " + std::to_string(k) +
                                        " larger than input " + std::to_string(in));
  }
  if ((in - k) % s != 0) {
    fail(ErrorCode::shape_mismatch,
         layer_name(i, l) + ": valid padding gives non-integral size (" + std::to_string(in) +
             " - " + std::to_string(k) + ") / " + std::to_string(s));
  }
  return (in - k) / s + 1;
}

}  // namespace detail

/// Output shape of every layer under standard same/valid convolution arithmetic.
inline ShapePlan propagate(const TensorShape& input, std::span<const LayerSpec> layers) {
  require(input.w > 0 && input.d > 0 && input.h > 0 && input.c > 0,
          "netshape: input dimensions must be positive", ErrorCode::shape_mismatch);
  ShapePlan plan{input, {layers.begin(), layers.end()}, {}, 0};
  TensorShape cur = input;
  bool flattened = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string name = detail::layer_name(i, l);
    for (int a = 0; a < 3; ++a) {
      require(l.kernel[a] > 0 && l.stride[a] > 0, name + ": kernel and stride must be positive",
              ErrorCode::shape_mismatch);
    }
    switch (l.kind) {
      case LayerKind::conv3d:
      case LayerKind::pool3d: {
        require(!flattened, name + ": spatial layer after a dense layer", ErrorCode::shape_mismatch);
        TensorShape next;
        next.w = detail::spatial_out(cur.w, l.kernel[0], l.stride[0], l.padding, i, l);
        next.d = detail::spatial_out(cur.d, l.kernel[1], l.stride[1], l.padding, i, l);
        next.h = detail::spatial_out(cur.h, l.kernel[2], l.stride[2], l.padding, i, l);
        if (l.kind == LayerKind::conv3d) {
          require(l.channels_out > 0, name + ": channels_out must be positive",
                  ErrorCode::shape_mismatch);
          next.c = l.channels_out;
        } else {
          require(l.channels_out == 0 || l.channels_out == cur.c,
                  name + ": pooling cannot change the channel count", ErrorCode::shape_mismatch);
          next.c = cur.c;
        }
        cur = next;
        break;
      }
      case LayerKind::dropout:
        break;
      case LayerKind::global_reduce:
        cur = {1, 1, 1, cur.c};
        break;
      case LayerKind::dense:
        require(l.channels_out > 0, name + ": channels_out must be positive",
                ErrorCode::shape_mismatch);
        cur = {1, 1, 1, l.channels_out};
        flattened = true;
        break;
    }
    plan.outputs.push_back(cur);
  }
  plan.final_length = cur.flat();
  return plan;
}

/// Six convolutions (each followed by dropout except the output one), then
/// a global average. The last convolution emits categories * 7 channels.
inline std::vector<LayerSpec> default_layers(int categories) {
  require(categories > 0, "netshape: need at least one category");
  auto conv = [](int k, int s, int c) {
    return LayerSpec{LayerKind::conv3d, {k, k, k}, {s, s, s}, c, Padding::same};
  };
  const LayerSpec drop{LayerKind::dropout};
  return {conv(3, 1, 32), drop, conv(3, 2, 64),  drop, conv(3, 2, 64), drop,
          conv(3, 2, 128), drop, conv(3, 2, 128), drop, conv(1, 1, categories * 7),
          LayerSpec{LayerKind::global_reduce}};
}

inline ShapePlan default_plan(const GridShape& grid, int categories) {
  const auto layers = default_layers(categories);
  return propagate({grid.w, grid.d, grid.h, 1}, layers);
}

// ---------------------------------------------------------------------------
// JSON plans: {"input": [W, D, H, C], "layers": [{"kind": "conv3d",
// "kernel": [3,3,3] or 3, "stride": ..., "channels_out": 32,
// "padding": "same"}, ...]}

namespace detail {

inline Triple triple_from(const nlohmann::json& j, const std::string& what) {
  if (j.is_number_integer()) {
    const int v = j.get<int>();
    return {v, v, v};
  }
  require(j.is_array() && j.size() == 3, what + " must be an integer or a 3-element array",
          ErrorCode::format);
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

inline void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(ErrorCode::format, where + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace detail

inline ShapePlan plan_from_json(const nlohmann::json& j) {
  try {
    require(j.is_object(), "plan: expected a JSON object", ErrorCode::format);
    detail::check_keys(j, {"input", "layers"}, "plan");
    const auto& in = j.at("input");
    require(in.is_array() && in.size() == 4, "plan: input must be [W, D, H, C]", ErrorCode::format);
    const TensorShape input{in[0].get<int>(), in[1].get<int>(), in[2].get<int>(), in[3].get<int>()};
    std::vector<LayerSpec> layers;
    for (const auto& lj : j.at("layers")) {
      const std::string where = "plan layer " + std::to_string(layers.size());
      detail::check_keys(lj, {"kind", "kernel", "stride", "channels_out", "padding"}, where);
      LayerSpec l;
      const auto kind = lj.at("kind").get<std::string>();
      if (kind == "conv3d") l.kind = LayerKind::conv3d;
      else if (kind == "pool3d") l.kind = LayerKind::pool3d;
      else if (kind == "dropout") l.kind = LayerKind::dropout;
      else if (kind == "global_reduce") l.kind = LayerKind::global_reduce;
      else if (kind == "dense") l.kind = LayerKind::dense;
      else fail(ErrorCode::format, where + ": unknown kind '" + kind + "'");
      if (lj.contains("kernel")) l.kernel = detail::triple_from(lj["kernel"], where + " kernel");
      if (lj.contains("stride")) l.stride = detail::triple_from(lj["stride"], where + " stride");
      l.channels_out = lj.value("channels_out", 0);
      const auto pad = lj.value("padding", std::string("same"));
      require(pad == "same" || pad == "valid", where + ": padding must be same or valid",
              ErrorCode::format);
      l.padding = pad == "same" ? Padding::same : Padding::valid;
      layers.push_back(l);
    }
    return propagate(input, layers);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, std::string("plan: ") + e.what());
  }
}

inline void print_shape_table(std::ostream& os, const ShapePlan& plan) {
  auto dims = [](const TensorShape& s) {
    return std::to_string(s.w) + "x" + std::to_string(s.d) + "x" + std::to_string(s.h) + "x" +
           std::to_string(s.c);
  };
  os << std::left << std::setw(6) << "layer" << std::setw(15) << "kind" << std::setw(10)
     << "kernel" << std::setw(10) << "stride" << std::setw(8) << "pad" << "output\n";
  os << std::setw(6) << "-" << std::setw(15) << "input" << std::setw(10) << "" << std::setw(10)
     << "" << std::setw(8) << "" << dims(plan.input) << '\n';
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    const auto& l = plan.layers[i];
    const bool spatial = l.kind == LayerKind::conv3d || l.kind == LayerKind::pool3d;
    auto t = [](const Triple& x) {
      return std::to_string(x[0]) + "," + std::to_string(x[1]) + "," + std::to_string(x[2]);
    };
    os << std::setw(6) << i << std::setw(15) << to_string(l.kind) << std::setw(10)
       << (spatial ? t(l.kernel) : "") << std::setw(10) << (spatial ? t(l.stride) : "")
       << std::setw(8) << (spatial ? (l.padding == Padding::same ? "same" : "valid") : "")
       << dims(plan.outputs[i]) << '\n';
  }
  os << "final flat length: " << plan.final_length << '\n';
}

// ---------------------------------------------------------------------------
// Naive forward pass

inline constexpr int kNaiveMaxDim = 32;

struct LayerWeights {
  std::vector<double> kernel;  // conv: [kx][ky][kz][cin][cout]; dense: [in][out]
  std::vector<double> bias;    // [cout]
};

struct NetWeights {
  std::vector<LayerWeights> layers;  // parallel to ShapePlan::layers
};

/// Uniform weights with variance 1/fan_in from a seeded stream; biases are
/// zero unless `bias_scale` > 0.
inline NetWeights init_weights(const ShapePlan& plan, std::uint64_t seed, double bias_scale = 0.0) {
  Rng rng(seed);
  NetWeights w;
  w.layers.resize(plan.layers.size());
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    const auto& l = plan.layers[i];
    if (!l.has_weights()) continue;
    const TensorShape in = i == 0 ? plan.input : plan.outputs[i - 1];
    const std::int64_t fan_in = l.kind == LayerKind::conv3d
                                    ? std::int64_t{l.kernel[0]} * l.kernel[1] * l.kernel[2] * in.c
                                    : in.flat();
    const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
    auto& lw = w.layers[i];
    lw.kernel.resize(static_cast<std::size_t>(fan_in) * l.channels_out);
    for (auto& x : lw.kernel) x = rng.uniform(-a, a);
    lw.bias.assign(static_cast<std::size_t>(l.channels_out), 0.0);
    if (bias_scale > 0.0) {
      for (auto& b : lw.bias) b = rng.uniform(-bias_scale, bias_scale);
    }
  }
  return w;
}

namespace detail {

// Activations are stored [x][y][z][c].
struct Tensor {
  TensorShape shape;
  std::vector<double> v;

  explicit Tensor(TensorShape s) : shape(s), v(static_cast<std::size_t>(s.flat()), 0.0) {}
  std::size_t at(int x, int y, int z, int c) const {
    return ((static_cast<std::size_t>(x) * shape.d + y) * shape.h + z) * shape.c + c;
  }
};

inline int pad_before(int in, int out, int k, int s, Padding p) {
  if (p == Padding::valid) return 0;
  return std::max((out - 1) * s + k - in, 0) / 2;
}

inline Tensor conv3d(const Tensor& in, const LayerSpec& l, const TensorShape& out_shape,
                     const LayerWeights& w) {
  Tensor out(out_shape);
  const int px = pad_before(in.shape.w, out_shape.w, l.kernel[0], l.stride[0], l.padding);
  const int py = pad_before(in.shape.d, out_shape.d, l.kernel[1], l.stride[1], l.padding);
  const int pz = pad_before(in.shape.h, out_shape.h, l.kernel[2], l.stride[2], l.padding);
  const int cin = in.shape.c, cout = out_shape.c;
  for (int x = 0; x < out_shape.w; ++x) {
    for (int y = 0; y < out_shape.d; ++y) {
      for (int z = 0; z < out_shape.h; ++z) {
        double* dst = &out.v[out.at(x, y, z, 0)];
        for (int co = 0; co < cout; ++co) dst[co] = w.bias[co];
        for (int kx = 0; kx < l.kernel[0]; ++kx) {
          const int ix = x * l.stride[0] + kx - px;
          if (ix < 0 || ix >= in.shape.w) continue;
          for (int ky = 0; ky < l.kernel[1]; ++ky) {
            const int iy = y * l.stride[1] + ky - py;
            if (iy < 0 || iy >= in.shape.d) continue;
            for (int kz = 0; kz < l.kernel[2]; ++kz) {
              const int iz = z * l.stride[2] + kz - pz;
              if (iz < 0 || iz >= in.shape.h) continue;
              const double* src = &in.v[in.at(ix, iy, iz, 0)];
              const std::size_t kbase =
                  ((static_cast<std::size_t>(kx) * l.kernel[1] + ky) * l.kernel[2] + kz) * cin;
              for (int ci = 0; ci < cin; ++ci) {
                const double a = src[ci];
                if (a == 0.0) continue;
                const double* wk = &w.kernel[(kbase + ci) * cout];
                for (int co = 0; co < cout; ++co) dst[co] += a * wk[co];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

inline Tensor max_pool(const Tensor& in, const LayerSpec& l, const TensorShape& out_shape) {
  Tensor out(out_shape);
  const int px = pad_before(in.shape.w, out_shape.w, l.kernel[0], l.stride[0], l.padding);
  const int py = pad_before(in.shape.d, out_shape.d, l.kernel[1], l.stride[1], l.padding);
  const int pz = pad_before(in.shape.h, out_shape.h, l.kernel[2], l.stride[2], l.padding);
  for (int x = 0; x < out_shape.w; ++x) {
    for (int y = 0; y < out_shape.d; ++y) {
      for (int z = 0; z < out_shape.h; ++z) {
        for (int c = 0; c < out_shape.c; ++c) {
          double best = -HUGE_VAL;
          for (int kx = 0; kx < l.kernel[0]; ++kx) {
            const int ix = x * l.stride[0] + kx - px;
            if (ix < 0 || ix >= in.shape.w) continue;
            for (int ky = 0; ky < l.kernel[1]; ++ky) {
              const int iy = y * l.stride[1] + ky - py;
              if (iy < 0 || iy >= in.shape.d) continue;
              for (int kz = 0; kz < l.kernel[2]; ++kz) {
                const int iz = z * l.stride[2] + kz - pz;
                if (iz < 0 || iz >= in.shape.h) continue;
                best = std::max(best, in.v[in.at(ix, iy, iz, c)]);
              }
            }
          }
          out.v[out.at(x, y, z, c)] = best;
        }
      }
    }
  }
  return out;
}

}  // namespace detail

/// Direct-convolution forward pass. ReLU follows every weighted layer except
/// the last one; dropout is the identity; global_reduce averages spatially.
inline std::vector<double> forward(const VoxelGrid& grid, const ShapePlan& plan,
                                   const NetWeights& weights) {
  const GridShape& g = grid.dims();
  require(plan.input.c == 1, "forward: plan input must have one channel",
          ErrorCode::shape_mismatch);
  require(g.w == plan.input.w && g.d == plan.input.d && g.h == plan.input.h,
          "forward: grid dimensions do not match the plan input", ErrorCode::shape_mismatch);
  require(g.w <= kNaiveMaxDim && g.d <= kNaiveMaxDim && g.h <= kNaiveMaxDim,
          "forward: naive path is limited to 32 cells per axis", ErrorCode::invalid_argument);
  require(weights.layers.size() == plan.layers.size(), "forward: weights do not match the plan",
          ErrorCode::shape_mismatch);

  std::size_t last_weighted = plan.layers.size();
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    if (plan.layers[i].has_weights()) last_weighted = i;
  }

  detail::Tensor cur({g.w, g.d, g.h, 1});
  for (int x = 0; x < g.w; ++x) {
    for (int y = 0; y < g.d; ++y) {
      for (int z = 0; z < g.h; ++z) cur.v[cur.at(x, y, z, 0)] = grid.at(x, y, z);
    }
  }

  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    const auto& l = plan.layers[i];
    const auto& out_shape = plan.outputs[i];
    switch (l.kind) {
      case LayerKind::conv3d:
        cur = detail::conv3d(cur, l, out_shape, weights.layers[i]);
        break;
      case LayerKind::pool3d:
        cur = detail::max_pool(cur, l, out_shape);
        break;
      case LayerKind::dropout:
        break;
      case LayerKind::global_reduce: {
        detail::Tensor out(out_shape);
        const double n = static_cast<double>(cur.shape.w) * cur.shape.d * cur.shape.h;
        for (std::size_t j = 0; j < cur.v.size(); ++j) {
          out.v[j % static_cast<std::size_t>(cur.shape.c)] += cur.v[j];
        }
        for (auto& x : out.v) x /= n;
        cur = std::move(out);
        break;
      }
      case LayerKind::dense: {
        detail::Tensor out(out_shape);
        const auto& w = weights.layers[i];
        const int n_out = l.channels_out;
        for (int o = 0; o < n_out; ++o) out.v[o] = w.bias[o];
        for (std::size_t j = 0; j < cur.v.size(); ++j) {
          const double a = cur.v[j];
          for (int o = 0; o < n_out; ++o) out.v[o] += a * w.kernel[j * n_out + o];
        }
        cur = std::move(out);
        break;
      }
    }
    if (l.has_weights() && i != last_weighted) {
      for (auto& x : cur.v) x = std::max(x, 0.0);
    }
  }
  return cur.v;
}

inline std::vector<double> forward_naive(const VoxelGrid& grid, const ShapePlan& plan,
                                         std::uint64_t weights_seed) {
  return forward(grid, plan, init_weights(plan, weights_seed));
}

}  // namespace fvx::net
