#include "pnerf/renderer/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "pnerf/numerics/tensor.hpp"

namespace pnerf::render {

std::vector<double> sample_coarse(const Ray& ray, std::size_t n, const UniformSource& uniform) {
  if (n == 0) throw ContractError("sample_coarse: need at least one sample");
  const double step = (ray.far - ray.near) / static_cast<double>(n);
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double u = uniform();
    v[j] = std::clamp(ray.near + (static_cast<double>(j) + u) * step, ray.near, ray.far);
  }
  return v;
}

std::vector<double> sample_coarse(const Ray& ray, std::size_t n, num::Rng* rng) {
  if (rng == nullptr) return sample_coarse(ray, n, [] { return 0.5; });
  return sample_coarse(ray, n, [rng] { return rng->uniform(); });
}

std::vector<double> sample_fine(std::span<const double> coarse, double far, std::span<const double> weights,
                                std::span<const double> u, double epsilon) {
  const std::size_t n = coarse.size();
  if (n == 0 || weights.size() != n) throw ShapeError("sample_fine: need one weight per coarse sample");
  std::vector<double> cdf(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] >= 0.0)) throw ContractError("sample_fine: weights must be non-negative");
    cdf[i + 1] = cdf[i] + weights[i] + epsilon;
  }
  const double total = cdf[n];
  std::vector<double> out(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double target = u[j] * total;
    // First bin whose upper CDF edge exceeds the target.
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cdf.begin() + 1, cdf.end(), target) - cdf.begin()) - 1;
    i = std::min(i, n - 1);
    const double lo = coarse[i];
    const double hi = i + 1 < n ? coarse[i + 1] : far;
    const double mass = cdf[i + 1] - cdf[i];
    const double frac = mass > 0.0 ? std::clamp((target - cdf[i]) / mass, 0.0, 1.0) : 0.5;
    out[j] = lo + frac * (hi - lo);
  }
  return out;
}

std::vector<double> sample_fine(std::span<const double> coarse, double far, std::span<const double> weights,
                                std::size_t n, num::Rng* rng, double epsilon) {
  std::vector<double> u(n);
  for (std::size_t j = 0; j < n; ++j)
    u[j] = rng != nullptr ? rng->uniform() : (static_cast<double>(j) + 0.5) / static_cast<double>(n);
  return sample_fine(coarse, far, weights, u, epsilon);
}

MergedDepths merge_depths(std::span<const double> coarse, std::span<const double> fine) {
  std::vector<std::size_t> fine_order(fine.size());
  std::iota(fine_order.begin(), fine_order.end(), std::size_t{0});
  std::stable_sort(fine_order.begin(), fine_order.end(), [&](std::size_t a, std::size_t b) { return fine[a] < fine[b]; });
  MergedDepths m;
  m.depth.reserve(coarse.size() + fine.size());
  m.source.reserve(coarse.size() + fine.size());
  std::size_t i = 0, j = 0;
  // Coarse depths are sorted; ties go to the coarse sample first.
  while (i < coarse.size() || j < fine_order.size()) {
    if (j == fine_order.size() || (i < coarse.size() && coarse[i] <= fine[fine_order[j]])) {
      m.depth.push_back(coarse[i]);
      m.source.push_back(i++);
    } else {
      m.depth.push_back(fine[fine_order[j]]);
      m.source.push_back(coarse.size() + fine_order[j++]);
    }
  }
  return m;
}

std::vector<double> interval_lengths(std::span<const double> depths, double far) {
  std::vector<double> d(depths.size());
  for (std::size_t i = 0; i < depths.size(); ++i) d[i] = (i + 1 < depths.size() ? depths[i + 1] : far) - depths[i];
  return d;
}

}  // namespace pnerf::render
