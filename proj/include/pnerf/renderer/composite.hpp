#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pnerf/numerics/tensor.hpp"

namespace pnerf::render {

// Alpha compositing of R rays with n samples each (sample-major per ray):
//   alpha_i = 1 - exp(-sigma_i delta_i), T_i = prod_{j<i} (1 - alpha_j),
//   w_i = T_i alpha_i, T_final = T_{n+1},
//   C = sum_i w_i c_i + T_final bg,
//   p = sum_i w_i softmax(s_i) + T_final e_bg.
// The same weights drive colour and semantics. Outputs carry gradients to
// sigma, color and logits; the recorded weights and transmittances are plain
// values (used for fine sampling and diagnostics).
struct Composite {
  num::Tensor rgb;       // [R, 3]
  num::Tensor semantic;  // [R, K], rows on the simplex
  std::vector<double> weights;        // [R * n]
  std::vector<double> transmittance;  // T_i, [R * n]
  std::vector<double> t_final;        // [R]
};

// sigma [R n, 1], color [R n, 3], logits [R n, K]; deltas [R n];
// background [R * 3]. Throws NumericError naming the ray and sample when a
// field output is non-finite.
Composite composite(const num::Tensor& sigma, const num::Tensor& color, const num::Tensor& logits,
                    std::span<const double> deltas, std::size_t samples_per_ray, std::span<const double> background,
                    std::size_t background_class);

}  // namespace pnerf::render
