#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pnerf/fields/pose.hpp"
#include "pnerf/numerics/mlp.hpp"

namespace pnerf::fields {

struct SemanticFieldConfig {
  std::size_t layers = 6;  // trunk depth
  std::size_t hidden = 64;
  std::size_t classes = 4;
  int levels_x = 10;
  int levels_d = 4;
  std::size_t audio_dim = 64;
  std::size_t latent_dim = 88;
  bool use_audio = true;
  bool use_latent = true;
};

// Per-sample outputs; sigma [n, 1] >= 0, color [n, 3] in (0, 1), logits [n, K].
struct FieldOutputs {
  num::Tensor sigma;
  num::Tensor color;
  num::Tensor logits;
};

// Point-wise result for single queries.
struct FieldOutput {
  Vec3 color{};
  double sigma = 0.0;
  std::vector<double> logits;
};

// (x, d, a, f) -> (c, sigma, s). The trunk sees the encoded position, the
// latent feature and (as a batch-constant first-layer row) the audio feature;
// density and semantic logits are read off the trunk, so they never depend on
// the view direction. The encoded direction joins only the colour branch.
class SemanticField {
 public:
  SemanticField() = default;
  explicit SemanticField(const SemanticFieldConfig& config);  // zero parameters

  void init_random(num::Rng& rng);

  // x_enc [n, pe_x]; latent [n, latent_dim] (ignored unless use_latent);
  // audio [1, audio_dim] (ignored unless use_audio); dir_enc [rays, pe_d];
  // ray_of_sample[i] selects the dir_enc row of sample i.
  FieldOutputs forward(const num::Tensor& x_enc, const num::Tensor& latent, const num::Tensor& audio,
                       const num::Tensor& dir_enc, std::span<const std::size_t> ray_of_sample) const;

  // Density and logits only (the colour branch is skipped).
  FieldOutputs geometry(const num::Tensor& x_enc, const num::Tensor& latent, const num::Tensor& audio) const;

  void collect(const std::string& prefix, num::ParameterList& out) const;
  const SemanticFieldConfig& config() const { return config_; }
  std::size_t position_width() const;
  std::size_t direction_width() const;

 private:
  num::Tensor trunk_features(const num::Tensor& x_enc, const num::Tensor& latent, const num::Tensor& audio) const;

  SemanticFieldConfig config_;
  num::Mlp trunk_;
  num::Tensor audio_w_;            // [audio_dim, hidden]
  num::Tensor sigma_w_, sigma_b_;  // [hidden, 1]
  num::Tensor logit_w_, logit_b_;  // [hidden, K]
  num::Tensor feature_w_, feature_b_;
  num::Tensor color_feature_w_, color_dir_w_, color_b_;
  num::Tensor color_out_w_, color_out_b_;
};

// Single-point convenience: x normalized to the scene box, d unit length,
// a of length audio_dim, f of length latent_dim.
FieldOutput semantic_field(const Vec3& x, const Vec3& d, std::span<const double> a, std::span<const double> f,
                           const SemanticField& params);

}  // namespace pnerf::fields
