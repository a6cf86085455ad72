#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pnerf/numerics/rng.hpp"
#include "pnerf/renderer/camera.hpp"

namespace pnerf::render {

// Returns uniforms in [0, 1).
using UniformSource = std::function<double()>;

// Stratified depths: v_j = v_n + (j + u_j) (v_f - v_n) / n, one draw per
// stratum. With a null rng the stratum midpoints are used.
std::vector<double> sample_coarse(const Ray& ray, std::size_t n, const UniformSource& uniform);
std::vector<double> sample_coarse(const Ray& ray, std::size_t n, num::Rng* rng);

// Inverse-CDF sampling of the piecewise-constant density proportional to
// (w_i + epsilon) on the bins [v_i, v_{i+1}], v_{N+1} = far. One output
// depth per entry of `u`, in the same order.
std::vector<double> sample_fine(std::span<const double> coarse, double far, std::span<const double> weights,
                                std::span<const double> u, double epsilon = 1e-5);
// Draws n depths: iid uniforms from `rng`, or the evenly spaced quantiles
// (j + 0.5) / n when rng is null.
std::vector<double> sample_fine(std::span<const double> coarse, double far, std::span<const double> weights,
                                std::size_t n, num::Rng* rng, double epsilon = 1e-5);

// Merged, sorted depths. source[i] < coarse.size() names a coarse sample,
// otherwise coarse.size() + index into `fine`.
struct MergedDepths {
  std::vector<double> depth;
  std::vector<std::size_t> source;
};
MergedDepths merge_depths(std::span<const double> coarse, std::span<const double> fine);

// delta_i = v_{i+1} - v_i with v_{N+1} = far.
std::vector<double> interval_lengths(std::span<const double> depths, double far);

}  // namespace pnerf::render
