#pragma once

#include <string>
#include <vector>

#include "frustumvox/geometry.hpp"

namespace fvx {

/// One annotated object: its 2D detection rect and amodal 3D box.
struct ObjectSample {
  std::string category;
  Rect2 rect;
  OrientedBox3 box;
};

/// A sensor frame with its world-frame cloud and annotations.
struct Frame {
  PointCloud cloud;
  CameraIntrinsics intrinsics;
  Pose pose;
  std::vector<ObjectSample> objects;
};

}  // namespace fvx
