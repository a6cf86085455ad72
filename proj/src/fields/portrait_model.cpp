#include "pnerf/fields/portrait_model.hpp"

#include "pnerf/encoders/positional.hpp"
#include "pnerf/numerics/ops.hpp"

namespace pnerf::fields {

using nlohmann::json;
using num::Tensor;

json to_json(const ModelConfig& c) {
  return {
      {"semantic",
       {{"layers", c.semantic.layers},
        {"hidden", c.semantic.hidden},
        {"classes", c.semantic.classes},
        {"levels_x", c.semantic.levels_x},
        {"levels_d", c.semantic.levels_d}}},
      {"deform",
       {{"layers", c.deform.layers},
        {"hidden", c.deform.hidden},
        {"levels_x", c.deform.levels_x},
        {"levels_t", c.deform.levels_t}}},
      {"audio",
       {{"raw_dim", c.audio.raw_dim},
        {"window", c.audio.window},
        {"conv_dim", c.audio.conv_dim},
        {"feature_dim", c.audio.feature_dim}}},
      {"latent",
       {{"resolutions", c.latent.resolutions},
        {"kernel_std_cells", c.latent.kernel_std_cells},
        {"support_cells", c.latent.support_cells},
        {"code_dim", c.latent.code_dim}}},
      {"use_deform", c.use_deform},
      {"use_latent", c.use_latent},
      {"use_audio", c.use_audio},
  };
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  if (j.contains("semantic")) {
    const auto& s = j["semantic"];
    c.semantic.layers = s.value("layers", c.semantic.layers);
    c.semantic.hidden = s.value("hidden", c.semantic.hidden);
    c.semantic.classes = s.value("classes", c.semantic.classes);
    c.semantic.levels_x = s.value("levels_x", c.semantic.levels_x);
    c.semantic.levels_d = s.value("levels_d", c.semantic.levels_d);
  }
  if (j.contains("deform")) {
    const auto& d = j["deform"];
    c.deform.layers = d.value("layers", c.deform.layers);
    c.deform.hidden = d.value("hidden", c.deform.hidden);
    c.deform.levels_x = d.value("levels_x", c.deform.levels_x);
    c.deform.levels_t = d.value("levels_t", c.deform.levels_t);
  }
  if (j.contains("audio")) {
    const auto& a = j["audio"];
    c.audio.raw_dim = a.value("raw_dim", c.audio.raw_dim);
    c.audio.window = a.value("window", c.audio.window);
    c.audio.conv_dim = a.value("conv_dim", c.audio.conv_dim);
    c.audio.feature_dim = a.value("feature_dim", c.audio.feature_dim);
  }
  if (j.contains("latent")) {
    const auto& l = j["latent"];
    c.latent.resolutions = l.value("resolutions", c.latent.resolutions);
    c.latent.kernel_std_cells = l.value("kernel_std_cells", c.latent.kernel_std_cells);
    c.latent.support_cells = l.value("support_cells", c.latent.support_cells);
    c.latent.code_dim = l.value("code_dim", c.latent.code_dim);
  }
  c.use_deform = j.value("use_deform", c.use_deform);
  c.use_latent = j.value("use_latent", c.use_latent);
  c.use_audio = j.value("use_audio", c.use_audio);
  return c;
}

PortraitModel::PortraitModel(const ModelConfig& config, std::vector<enc::Vec3> anchors)
    : config_(config), anchors_(std::move(anchors)) {
  config_.semantic.use_audio = config.use_audio;
  config_.semantic.use_latent = config.use_latent;
  config_.semantic.audio_dim = config.audio.feature_dim;
  config_.semantic.latent_dim = config.latent.code_dim;
  audio_ = enc::AudioEncoder(config_.audio);
  if (config_.use_latent) latent_.emplace(config_.latent, anchors_);
  if (config_.use_deform) deform_.emplace(config_.deform);
  coarse_ = SemanticField(config_.semantic);
  fine_ = SemanticField(config_.semantic);
}

void PortraitModel::init_random(std::uint64_t seed) {
  num::Rng rng(num::mix_seed({seed, 0x6d6f64656cULL}));
  audio_.init_random(rng);
  if (latent_) latent_->init_random(rng);
  if (deform_) deform_->init_random(rng);
  coarse_.init_random(rng);
  fine_.init_random(rng);
}

num::ParameterList PortraitModel::parameters() const {
  num::ParameterList out;
  if (config_.use_audio) audio_.collect("audio", out);
  if (latent_) latent_->collect("latent", out);
  if (deform_) deform_->collect("deform", out);
  coarse_.collect("coarse", out);
  fine_.collect("fine", out);
  return out;
}

FrameConditioning PortraitModel::condition(const enc::AudioWindow* window, double time, const Pose& head,
                                           const Pose& canonical) const {
  FrameConditioning f;
  if (config_.use_audio) {
    if (window == nullptr) throw ContractError("PortraitModel: audio window required");
    f.audio = audio_.encode(*window);
  }
  if (latent_) f.latent = latent_->prepare();
  f.time = time;
  f.head = head;
  f.canonical = canonical;
  return f;
}

WarpedSamples PortraitModel::warp(const Tensor& points, const FrameConditioning& frame) const {
  WarpedSamples s;
  if (deform_) {
    const Tensor raw_enc = enc::positional_encode(points, deform_->config().levels_x, true);
    s.displacement = deform_->displacement(raw_enc, frame.time, frame.head, frame.canonical);
    s.warped = num::add(points, s.displacement);
  } else {
    s.warped = points;
  }
  s.x_enc = enc::positional_encode(s.warped, config_.semantic.levels_x, true);
  if (latent_) s.latent = latent_->query(*frame.latent, s.warped);
  return s;
}

FieldOutputs PortraitModel::evaluate(Pass pass, const WarpedSamples& samples, const Tensor& dir_enc,
                                     std::span<const std::size_t> ray_of_sample,
                                     const FrameConditioning& frame) const {
  return field(pass).forward(samples.x_enc, samples.latent, frame.audio, dir_enc, ray_of_sample);
}

FieldOutputs overall_field(const PortraitModel& model, Pass pass, const Tensor& points, const Tensor& dir_enc,
                           std::span<const std::size_t> ray_of_sample, const FrameConditioning& frame) {
  return model.evaluate(pass, model.warp(points, frame), dir_enc, ray_of_sample, frame);
}

}  // namespace pnerf::fields
