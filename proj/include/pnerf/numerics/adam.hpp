#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pnerf/numerics/tensor.hpp"

namespace pnerf::num {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update. `grads[i]` pairs with `params[i]`; an
// empty gradient counts as zero. Every gradient is checked before anything is
// written, so a non-finite entry throws NumericError and leaves params and
// state untouched.
void adam_step(AdamState& state, std::span<Tensor> params, std::span<const std::vector<double>> grads);

// Reads gradients from the parameters' own slots, applies adam_step, then
// clears the slots.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) { state_.config = config; }

  void step(std::span<Tensor> params);
  const AdamState& state() const { return state_; }
  AdamState& state() { return state_; }

 private:
  AdamState state_;
};

}  // namespace pnerf::num
