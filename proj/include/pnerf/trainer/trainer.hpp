#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnerf/dataio/dataset.hpp"
#include "pnerf/fields/portrait_model.hpp"
#include "pnerf/numerics/adam.hpp"
#include "pnerf/renderer/render.hpp"
#include "pnerf/scheduler/scheduler.hpp"

namespace pnerf::train {

struct TrainConfig {
  double lambda = 0.04;
  std::size_t rays = 512;  // N_s
  std::size_t iterations = 20000;
  double learning_rate = 5e-4;
  std::uint64_t seed = 0;
  std::size_t epoch_length = 0;  // iterations per epoch; 0 = one pass over the training frames
  std::size_t checkpoint_every = 0;  // 0 = only at the end
  bool dynamic_sampling = true;
  bool zero_init = false;  // all parameters zero instead of random (untrained baseline)
  std::size_t n_coarse = 32;
  std::size_t n_fine = 32;
  std::size_t chunk = 1024;
  fields::ModelConfig model;
};

nlohmann::json to_json(const TrainConfig& config);
// Unknown keys are rejected with ContractError; missing keys keep defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossReport {
  std::size_t iteration = 0;
  std::size_t frame = 0;
  double photometric = 0.0;
  double semantic = 0.0;
  double total = 0.0;
  std::vector<double> class_loss;  // mean per-ray rgb + semantic loss by class in this batch
  std::vector<std::size_t> class_rays;
};

// The config as trained: class count and audio width taken from the dataset.
TrainConfig resolve_config(TrainConfig config, const io::DatasetMeta& meta);

// Render settings implied by a dataset and a training config.
render::RenderConfig render_config(const io::DatasetMeta& meta, const TrainConfig& config);

// Anchors mapped into normalized scene coordinates.
std::vector<fields::Vec3> normalized_anchors(const io::Dataset& dataset);

// Conditioning for one dataset frame: audio window around it, normalized
// time, and head / canonical (frame 0) poses in normalized coordinates.
fields::FrameConditioning condition_frame(const fields::PortraitModel& model, const io::Dataset& dataset,
                                          std::size_t frame);

// Fine-pass render of a full dataset frame.
render::FrameImage render_dataset_frame(const fields::PortraitModel& model, const io::Dataset& dataset,
                                        const render::RenderConfig& config, std::size_t frame, std::size_t threads = 1);

class Trainer {
 public:
  Trainer(const io::Dataset& dataset, const TrainConfig& config);

  // One optimisation step on one training frame. Throws NumericError naming
  // the frame and pixel batch if the loss is not finite.
  LossReport step();
  std::size_t iteration() const { return iteration_; }

  // Runs until `config.iterations`, appending to `log` (if open) and writing
  // checkpoints to `checkpoint_base` every config.checkpoint_every
  // iterations and at the end (if non-empty).
  void run(std::ostream* log, const std::filesystem::path& checkpoint_base,
           const std::function<void(const LossReport&)>& on_step = {});

  void save(const std::filesystem::path& base) const;

  const fields::PortraitModel& model() const { return model_; }
  fields::PortraitModel& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  const render::RenderConfig& render() const { return render_; }
  const sched::ClassLossStats& stats() const { return stats_; }

 private:
  void begin_epoch(std::ostream* log);

  const io::Dataset& dataset_;
  TrainConfig config_;
  render::RenderConfig render_;
  fields::PortraitModel model_;
  num::ParameterList params_;
  std::vector<num::Tensor> tensors_;
  num::Adam adam_;
  sched::ClassLossStats stats_;
  std::vector<std::size_t> order_;
  std::size_t epoch_length_ = 0;
  std::size_t iteration_ = 0;
  std::ostream* log_ = nullptr;
  std::vector<io::FrameRecord> frames_;  // indexed like meta.train
  std::vector<std::size_t> frame_slot_;   // dataset frame -> index in frames_
};

// A trained model restored from a checkpoint, with the render settings it
// was trained with.
struct LoadedModel {
  fields::PortraitModel model;
  TrainConfig config;
  nlohmann::json meta;
};
LoadedModel load_model(const std::filesystem::path& checkpoint, const io::Dataset& dataset);

}  // namespace pnerf::train
