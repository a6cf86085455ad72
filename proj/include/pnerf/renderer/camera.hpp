#pragma once

#include <cstddef>

#include "pnerf/fields/pose.hpp"

namespace pnerf::render {

using fields::Pose;
using fields::Vec3;

// Pinhole intrinsics. Pixel (u, v) is continuous: the centre of pixel
// (col, row) is (col + 0.5, row + 0.5).
struct Intrinsics {
  double fx = 80.0;
  double fy = 80.0;
  double cx = 32.0;
  double cy = 32.0;
  std::size_t width = 64;
  std::size_t height = 64;
};

// Maps the dataset bounding box to [-1, 1]^3.
struct SceneBox {
  Vec3 center{0, 0, 0};
  double half_extent = 1.0;

  Vec3 normalize(const Vec3& x) const {
    return {(x[0] - center[0]) / half_extent, (x[1] - center[1]) / half_extent, (x[2] - center[2]) / half_extent};
  }
  Pose normalize(const Pose& p) const { return {p.rotation, normalize(p.translation)}; }
};

struct Ray {
  Vec3 origin{};
  Vec3 direction{0, 0, 1};
  double near = 0.0;
  double far = 1.0;
  double u = 0.0;
  double v = 0.0;
  double time = 0.0;

  Vec3 at(double s) const {
    return {origin[0] + s * direction[0], origin[1] + s * direction[1], origin[2] + s * direction[2]};
  }
};

// Camera frame: x right, y down, z forward; R maps camera axes to world axes
// and the centre is tau. Throws ContractError for pixels outside
// [0, width] x [0, height] or for near >= far.
Ray generate_ray(const Pose& pose, const Intrinsics& intrinsics, double u, double v, double time, double near,
                 double far);

}  // namespace pnerf::render
