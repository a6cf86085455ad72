#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pnerf/numerics/rng.hpp"
#include "pnerf/numerics/tensor.hpp"

namespace pnerf::num {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedParam>;

struct MlpConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 128;
  std::size_t output_dim = 0;
  std::size_t layers = 8;  // linear layers, including the output layer
};

// Rectifier on every hidden layer, identity on the output layer.
// weights[i] is [in_i, out_i]; biases[i] is [out_i].
class Mlp {
 public:
  Mlp() = default;
  // All parameters start at zero.
  explicit Mlp(const MlpConfig& config);

  // He-uniform hidden layers; the output layer is additionally scaled by
  // `output_scale` (0 gives a zero output layer).
  void init_random(Rng& rng, double output_scale = 1.0);

  Tensor forward(const Tensor& input) const;
  // Same as forward() but adds `row` ([1, hidden]) to the first layer's
  // pre-activation. Equivalent to concatenating a batch-constant input.
  Tensor forward(const Tensor& input, const Tensor& row) const;

  // Split form: first-layer pre-activation, then everything after it.
  Tensor first_preactivation(const Tensor& input) const;
  Tensor forward_tail(const Tensor& first_preactivation) const;

  void collect(const std::string& prefix, ParameterList& out) const;

  const MlpConfig& config() const { return config_; }
  std::size_t layer_count() const { return weights_.size(); }
  Tensor& weight(std::size_t i) { return weights_[i]; }
  Tensor& bias(std::size_t i) { return biases_[i]; }

 private:
  MlpConfig config_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

Tensor mlp_forward(const Mlp& params, const Tensor& input);

// Fills a [in, out] weight with U(-a, a), a = gain * sqrt(6 / in).
void init_uniform(Tensor& weight, Rng& rng, double gain);

}  // namespace pnerf::num
