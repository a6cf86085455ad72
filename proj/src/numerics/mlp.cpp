#include "pnerf/numerics/mlp.hpp"

#include <cmath>

#include "pnerf/numerics/ops.hpp"

namespace pnerf::num {

Mlp::Mlp(const MlpConfig& config) : config_(config) {
  if (config.layers == 0 || config.input_dim == 0 || config.output_dim == 0) {
    throw ContractError("Mlp: layers, input_dim and output_dim must be positive");
  }
  if (config.layers > 1 && config.hidden_dim == 0) throw ContractError("Mlp: hidden_dim must be positive");
  for (std::size_t i = 0; i < config.layers; ++i) {
    const std::size_t in = i == 0 ? config.input_dim : config.hidden_dim;
    const std::size_t out = i + 1 == config.layers ? config.output_dim : config.hidden_dim;
    weights_.push_back(Tensor::zeros({in, out}, true));
    biases_.push_back(Tensor::zeros({out}, true));
  }
}

void init_uniform(Tensor& weight, Rng& rng, double gain) {
  const double a = gain * std::sqrt(6.0 / static_cast<double>(weight.rows()));
  for (auto& w : weight.mutable_values()) w = rng.uniform(-a, a);
}

void Mlp::init_random(Rng& rng, double output_scale) {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const bool last = i + 1 == weights_.size();
    // Hidden layers feed a rectifier; the output layer is linear.
    init_uniform(weights_[i], rng, last ? output_scale / std::sqrt(2.0) : 1.0);
    for (auto& b : biases_[i].mutable_values()) b = 0.0;
  }
}

Tensor Mlp::first_preactivation(const Tensor& input) const {
  if (input.cols() != config_.input_dim) {
    throw ShapeError("mlp_forward: input width " + std::to_string(input.cols()) + ", expected " +
                     std::to_string(config_.input_dim));
  }
  return linear(input, weights_[0], biases_[0]);
}

Tensor Mlp::forward_tail(const Tensor& first) const {
  Tensor h = first;
  for (std::size_t i = 1; i < weights_.size(); ++i) h = linear(relu(h), weights_[i], biases_[i]);
  return h;
}

Tensor Mlp::forward(const Tensor& input) const { return forward_tail(first_preactivation(input)); }

Tensor Mlp::forward(const Tensor& input, const Tensor& row) const {
  return forward_tail(add_row(first_preactivation(input), row));
}

void Mlp::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back({prefix + ".layer" + std::to_string(i) + ".weight", weights_[i]});
    out.push_back({prefix + ".layer" + std::to_string(i) + ".bias", biases_[i]});
  }
}

Tensor mlp_forward(const Mlp& params, const Tensor& input) { return params.forward(input); }

}  // namespace pnerf::num
