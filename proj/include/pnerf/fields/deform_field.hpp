#pragma once

#include <cstddef>

#include "pnerf/fields/pose.hpp"
#include "pnerf/numerics/mlp.hpp"

namespace pnerf::fields {

struct DeformFieldConfig {
  std::size_t layers = 6;
  std::size_t hidden = 64;
  int levels_x = 10;
  int levels_t = 4;
};

// Width of the per-frame conditioning row: encoded t, then R and tau of the
// head pose, then R and tau of the canonical pose.
std::size_t deform_condition_width(const DeformFieldConfig& config);

// (x, t, p_h, p_c) -> dx. The raw network G sees the encoded position and a
// batch-constant conditioning row; the output is
//   dx = G(x, t, p_h, p_c) - G(x, 0, p_c, p_c),
// which is exactly zero at (t = 0, p_h = p_c) for any parameters. Audio is not
// an input. Poses are expected in normalized scene coordinates.
class DeformField {
 public:
  DeformField() = default;
  explicit DeformField(const DeformFieldConfig& config);  // zero parameters

  void init_random(num::Rng& rng, double output_scale = 0.01);

  // x_enc [n, 3 * (2 L_x + 1)] -> dx [n, 3].
  num::Tensor displacement(const num::Tensor& x_enc, double t, const Pose& head, const Pose& canonical) const;

  void collect(const std::string& prefix, num::ParameterList& out) const;
  const DeformFieldConfig& config() const { return config_; }

 private:
  num::Tensor condition_row(double t, const Pose& head, const Pose& canonical) const;

  DeformFieldConfig config_;
  num::Mlp net_;
  num::Tensor condition_w_;  // [condition width, hidden]
};

struct DeformInput {
  Vec3 x{};          // normalized position
  double t = 0.0;    // normalized frame time in [0, 1]
  Pose head;         // p_h(t)
  Pose canonical;    // p_c = p_h(0)
};

Vec3 deform_field(const DeformInput& input, const DeformField& params);

}  // namespace pnerf::fields
