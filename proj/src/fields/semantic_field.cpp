#include "pnerf/fields/semantic_field.hpp"

#include <cmath>

#include "pnerf/encoders/positional.hpp"
#include "pnerf/numerics/ops.hpp"

namespace pnerf::fields {

using num::Tensor;

SemanticField::SemanticField(const SemanticFieldConfig& config) : config_(config) {
  if (config.layers == 0 || config.hidden < 2 || config.classes < 2) {
    throw ContractError("SemanticField: need at least one layer, hidden >= 2 and K >= 2");
  }
  const auto h = config.hidden, h2 = config.hidden / 2;
  const auto in = position_width() + (config.use_latent ? config.latent_dim : 0);
  trunk_ = num::Mlp({.input_dim = in, .hidden_dim = h, .output_dim = h, .layers = config.layers});
  if (config.use_audio) audio_w_ = Tensor::zeros({config.audio_dim, h}, true);
  sigma_w_ = Tensor::zeros({h, 1}, true);
  sigma_b_ = Tensor::zeros({1}, true);
  logit_w_ = Tensor::zeros({h, config.classes}, true);
  logit_b_ = Tensor::zeros({config.classes}, true);
  feature_w_ = Tensor::zeros({h, h}, true);
  feature_b_ = Tensor::zeros({h}, true);
  color_feature_w_ = Tensor::zeros({h, h2}, true);
  color_dir_w_ = Tensor::zeros({direction_width(), h2}, true);
  color_b_ = Tensor::zeros({h2}, true);
  color_out_w_ = Tensor::zeros({h2, 3}, true);
  color_out_b_ = Tensor::zeros({3}, true);
}

std::size_t SemanticField::position_width() const { return 3 * enc::encoded_width(config_.levels_x, true); }
std::size_t SemanticField::direction_width() const { return 3 * enc::encoded_width(config_.levels_d, true); }

void SemanticField::init_random(num::Rng& rng) {
  trunk_.init_random(rng);
  // The trunk's last layer feeds a rectifier too.
  num::init_uniform(trunk_.weight(trunk_.layer_count() - 1), rng, 1.0);
  if (config_.use_audio) num::init_uniform(audio_w_, rng, 0.5);
  num::init_uniform(sigma_w_, rng, 0.5);
  num::init_uniform(logit_w_, rng, 0.5);
  num::init_uniform(feature_w_, rng, 1.0 / std::sqrt(2.0));
  num::init_uniform(color_feature_w_, rng, 1.0);
  num::init_uniform(color_dir_w_, rng, 0.5);
  num::init_uniform(color_out_w_, rng, 0.5);
}

Tensor SemanticField::trunk_features(const Tensor& x_enc, const Tensor& latent, const Tensor& audio) const {
  if (x_enc.cols() != position_width()) {
    throw ShapeError("semantic_field: encoded position width " + std::to_string(x_enc.cols()) + ", expected " +
                     std::to_string(position_width()));
  }
  Tensor input = x_enc;
  if (config_.use_latent) {
    if (!latent.defined() || latent.cols() != config_.latent_dim || latent.rows() != x_enc.rows()) {
      throw ShapeError("semantic_field: latent feature must be [n, " + std::to_string(config_.latent_dim) + "]");
    }
    input = num::concat_cols({x_enc, latent});
  }
  Tensor h;
  if (config_.use_audio) {
    if (!audio.defined() || audio.numel() != config_.audio_dim) {
      throw ShapeError("semantic_field: audio feature must have " + std::to_string(config_.audio_dim) + " values");
    }
    h = trunk_.forward(input, num::matmul(num::reshape(audio, {1, config_.audio_dim}), audio_w_));
  } else {
    h = trunk_.forward(input);
  }
  return num::relu(h);
}

FieldOutputs SemanticField::geometry(const Tensor& x_enc, const Tensor& latent, const Tensor& audio) const {
  const Tensor h = trunk_features(x_enc, latent, audio);
  return {num::softplus(num::linear(h, sigma_w_, sigma_b_)), Tensor{}, num::linear(h, logit_w_, logit_b_)};
}

FieldOutputs SemanticField::forward(const Tensor& x_enc, const Tensor& latent, const Tensor& audio,
                                    const Tensor& dir_enc, std::span<const std::size_t> ray_of_sample) const {
  if (ray_of_sample.size() != x_enc.rows()) throw ShapeError("semantic_field: ray_of_sample length mismatch");
  if (dir_enc.cols() != direction_width()) throw ShapeError("semantic_field: encoded direction width mismatch");
  using namespace num;
  const Tensor h = trunk_features(x_enc, latent, audio);
  FieldOutputs out;
  out.sigma = softplus(linear(h, sigma_w_, sigma_b_));
  out.logits = linear(h, logit_w_, logit_b_);
  const Tensor feature = linear(h, feature_w_, feature_b_);
  const Tensor dir_term = gather_rows(matmul(dir_enc, color_dir_w_), ray_of_sample);
  const Tensor ch = relu(add(linear(feature, color_feature_w_, color_b_), dir_term));
  out.color = sigmoid(linear(ch, color_out_w_, color_out_b_));
  return out;
}

void SemanticField::collect(const std::string& prefix, num::ParameterList& out) const {
  trunk_.collect(prefix + ".trunk", out);
  if (config_.use_audio) out.push_back({prefix + ".audio.weight", audio_w_});
  out.push_back({prefix + ".sigma.weight", sigma_w_});
  out.push_back({prefix + ".sigma.bias", sigma_b_});
  out.push_back({prefix + ".semantic.weight", logit_w_});
  out.push_back({prefix + ".semantic.bias", logit_b_});
  out.push_back({prefix + ".feature.weight", feature_w_});
  out.push_back({prefix + ".feature.bias", feature_b_});
  out.push_back({prefix + ".color.feature_weight", color_feature_w_});
  out.push_back({prefix + ".color.direction_weight", color_dir_w_});
  out.push_back({prefix + ".color.bias", color_b_});
  out.push_back({prefix + ".color_out.weight", color_out_w_});
  out.push_back({prefix + ".color_out.bias", color_out_b_});
}

FieldOutput semantic_field(const Vec3& x, const Vec3& d, std::span<const double> a, std::span<const double> f,
                           const SemanticField& params) {
  const auto& cfg = params.config();
  const Tensor x_enc = enc::positional_encode(Tensor::from({1, 3}, {x[0], x[1], x[2]}), cfg.levels_x, true);
  const Tensor d_enc = enc::positional_encode(Tensor::from({1, 3}, {d[0], d[1], d[2]}), cfg.levels_d, true);
  const Tensor latent = cfg.use_latent ? Tensor::row(f) : Tensor{};
  const Tensor audio = cfg.use_audio ? Tensor::row(a) : Tensor{};
  const std::size_t ray0 = 0;
  const auto out = params.forward(x_enc, latent, audio, d_enc, std::span<const std::size_t>(&ray0, 1));
  FieldOutput r;
  r.color = {out.color.at(0), out.color.at(1), out.color.at(2)};
  r.sigma = out.sigma.at(0);
  r.logits.assign(out.logits.values().begin(), out.logits.values().end());
  return r;
}

}  // namespace pnerf::fields
