#pragma once

#include <array>

namespace pnerf::fields {

using Vec3 = std::array<double, 3>;

// Rigid pose {R, tau}; R is row-major and maps camera axes to world axes.
struct Pose {
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  Vec3 translation{0, 0, 0};

  static Pose identity() { return {}; }

  Vec3 rotate(const Vec3& v) const {
    const auto& r = rotation;
    return {r[0] * v[0] + r[1] * v[1] + r[2] * v[2], r[3] * v[0] + r[4] * v[1] + r[5] * v[2],
            r[6] * v[0] + r[7] * v[1] + r[8] * v[2]};
  }
  bool operator==(const Pose&) const = default;
};

double determinant(const std::array<double, 9>& r);

// Largest deviation of R^T R from the identity.
double orthonormality_error(const std::array<double, 9>& r);

// True when R is orthonormal with determinant +1, both within `tol`.
bool is_valid_rotation(const std::array<double, 9>& r, double tol = 1e-6);

// Rotation about a unit axis by `angle` radians (Rodrigues).
std::array<double, 9> axis_angle(const Vec3& axis, double angle);

std::array<double, 9> multiply(const std::array<double, 9>& a, const std::array<double, 9>& b);

}  // namespace pnerf::fields
