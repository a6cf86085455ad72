#include "pnerf/renderer/camera.hpp"

#include <cmath>
#include <string>

#include "pnerf/numerics/tensor.hpp"

namespace pnerf::render {

Ray generate_ray(const Pose& pose, const Intrinsics& k, double u, double v, double time, double near, double far) {
  if (!(u >= 0.0 && u <= static_cast<double>(k.width) && v >= 0.0 && v <= static_cast<double>(k.height))) {
    throw ContractError("generate_ray: pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") outside the image");
  }
  if (!(near > 0.0 && near < far)) throw ContractError("generate_ray: need 0 < near < far");
  const Vec3 cam{(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
  Vec3 d = pose.rotate(cam);
  const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  for (auto& c : d) c /= n;
  Ray r;
  r.origin = pose.translation;
  r.direction = d;
  r.near = near;
  r.far = far;
  r.u = u;
  r.v = v;
  r.time = time;
  return r;
}

}  // namespace pnerf::render
