// Walks one synthetic chair through the whole chain: render, propose a crop
// from its 2D rect, voxelize, encode the box target and score a decoded guess.

#include <cstdio>

#include "frustumvox/cropbox.hpp"
#include "frustumvox/eval.hpp"
#include "frustumvox/head.hpp"
#include "frustumvox/scenegen.hpp"
#include "frustumvox/voxel.hpp"

int main() {
  using namespace fvx;

  scene::SceneSpec spec;
  spec.background = {{{0, 0, 1}, 0.0}};
  spec.objects = {{"chair", OrientedBox3({0.1, 3.0, 0.25}, 0.45, 0.42, 0.5, 0.3), 600.0}};
  const auto frame = scene::render(spec).to_frame();
  const auto& obj = frame.objects.at(0);
  std::printf("rect  [%.1f %.1f %.1f %.1f] px, %zu points in scene\n", obj.rect.u_min(), obj.rect.v_min(),
              obj.rect.u_max(), obj.rect.v_max(), frame.cloud.size());

  const Anchor anchor{"chair", 0.45, 0.42, 0.5};
  const ScaleSpec scale = scale_spec(assign_scale(anchor.a_w, anchor.a_d, anchor.a_h));
  const auto prop = propose_crop(frame.cloud, obj.rect, frame.intrinsics, frame.pose, scale, Phase::inference, 1);
  const auto v = ioi(obj.box, prop.crop);
  std::printf("crop  %s, %.2f m x %.2f m, IoI xy %.3f z %.3f\n", std::string(to_string(scale.name)).c_str(),
              scale.crop_side, scale.crop_height, v.ioi_xy, v.ioi_z);

  const auto grid = voxelize(prop.points, prop.crop, scale);
  std::printf("grid  %dx%dx%d, %llu points binned\n", scale.grid.w, scale.grid.d, scale.grid.h,
              static_cast<unsigned long long>(grid.total()));

  const HeadVector target = encode(obj.box, prop.crop, anchor);
  HeadVector guess = target;
  guess.tx += 0.02;
  guess.lw -= 0.1;
  const auto m = center_size_metrics(decode(guess, prop.crop, anchor), obj.box);
  std::printf("guess loss %.5f, D_xyz %.3f m, D_wdh %.3f m, IoU %.3f\n", loss(guess, target, {}).total, m.d_xyz,
              m.d_wdh, iou_3d(decode(guess, prop.crop, anchor), obj.box));
  return 0;
}
