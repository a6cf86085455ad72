#include "pnerf/numerics/adam.hpp"

#include <cmath>
#include <string>

namespace pnerf::num {

void adam_step(AdamState& state, std::span<Tensor> params, std::span<const std::vector<double>> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
  if (!state.m.empty() && state.m.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks a different parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].empty() && grads[i].size() != params[i].numel()) {
      throw ShapeError("adam_step: gradient " + std::to_string(i) + " has wrong size");
    }
    for (double g : grads[i]) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient for parameter " + std::to_string(i) +
                           "; update refused");
      }
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  const auto& c = state.config;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has = !grads[i].empty();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = has ? grads[i][j] : 0.0;
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

void Adam::step(std::span<Tensor> params) {
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p.grad_view().begin(), p.grad_view().end());
  adam_step(state_, params, grads);
  for (auto& p : params) p.zero_grad();
}

}  // namespace pnerf::num
