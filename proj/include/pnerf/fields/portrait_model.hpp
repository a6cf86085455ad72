#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "pnerf/encoders/audio_encoder.hpp"
#include "pnerf/encoders/latent_volume.hpp"
#include "pnerf/fields/deform_field.hpp"
#include "pnerf/fields/semantic_field.hpp"

namespace pnerf::fields {

struct ModelConfig {
  SemanticFieldConfig semantic;
  DeformFieldConfig deform;
  enc::AudioEncoderConfig audio;
  enc::LatentVolumeConfig latent;
  bool use_deform = true;
  bool use_latent = true;
  bool use_audio = true;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Everything that is constant across the samples of one frame.
struct FrameConditioning {
  num::Tensor audio;  // [1, audio_dim], undefined when audio is off
  std::optional<enc::LatentGrid> latent;
  double time = 0.0;
  Pose head;       // normalized scene coordinates
  Pose canonical;  // normalized scene coordinates
};

// Sample positions after the torso warp, with their encodings.
struct WarpedSamples {
  num::Tensor displacement;  // [n, 3]; undefined when deformation is off
  num::Tensor warped;        // [n, 3]
  num::Tensor x_enc;         // [n, pe_x]
  num::Tensor latent;        // [n, latent_dim]; undefined when the latent volume is off
};

enum class Pass { kCoarse, kFine };

// The full set of trainable functions: audio encoder, latent code volume,
// shared torso deformation field, and coarse / fine semantic fields.
class PortraitModel {
 public:
  PortraitModel() = default;
  // `anchors` are in normalized scene coordinates. Parameters start at zero
  // (latent projection at identity).
  PortraitModel(const ModelConfig& config, std::vector<enc::Vec3> anchors);

  void init_random(std::uint64_t seed);

  num::ParameterList parameters() const;
  const ModelConfig& config() const { return config_; }
  const std::vector<enc::Vec3>& anchors() const { return anchors_; }

  FrameConditioning condition(const enc::AudioWindow* window, double time, const Pose& head,
                              const Pose& canonical) const;

  // points [n, 3] normalized -> warped samples (x + dx) with encodings.
  WarpedSamples warp(const num::Tensor& points, const FrameConditioning& frame) const;

  FieldOutputs evaluate(Pass pass, const WarpedSamples& samples, const num::Tensor& dir_enc,
                        std::span<const std::size_t> ray_of_sample, const FrameConditioning& frame) const;

  const SemanticField& field(Pass pass) const { return pass == Pass::kCoarse ? coarse_ : fine_; }
  SemanticField& field(Pass pass) { return pass == Pass::kCoarse ? coarse_ : fine_; }
  const DeformField* deform() const { return deform_ ? &*deform_ : nullptr; }
  DeformField* deform() { return deform_ ? &*deform_ : nullptr; }
  const enc::LatentVolume* latent() const { return latent_ ? &*latent_ : nullptr; }
  enc::LatentVolume* latent() { return latent_ ? &*latent_ : nullptr; }
  const enc::AudioEncoder& audio() const { return audio_; }

 private:
  ModelConfig config_;
  std::vector<enc::Vec3> anchors_;
  enc::AudioEncoder audio_;
  std::optional<enc::LatentVolume> latent_;
  std::optional<DeformField> deform_;
  SemanticField coarse_;
  SemanticField fine_;
};

// (x + dx, d, a, f) -> (c, sigma, s): warp the samples, then evaluate the
// semantic field at the warped points.
FieldOutputs overall_field(const PortraitModel& model, Pass pass, const num::Tensor& points,
                           const num::Tensor& dir_enc, std::span<const std::size_t> ray_of_sample,
                           const FrameConditioning& frame);

}  // namespace pnerf::fields
