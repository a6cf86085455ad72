#include "pnerf/trainer/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "pnerf/numerics/checkpoint.hpp"
#include "pnerf/numerics/ops.hpp"
#include "pnerf/trainer/losses.hpp"

namespace pnerf::train {

using nlohmann::json;
using num::Tensor;

json to_json(const TrainConfig& c) {
  return {
      {"lambda", c.lambda},
      {"rays", c.rays},
      {"iterations", c.iterations},
      {"learning_rate", c.learning_rate},
      {"seed", c.seed},
      {"epoch_length", c.epoch_length},
      {"checkpoint_every", c.checkpoint_every},
      {"dynamic_sampling", c.dynamic_sampling},
      {"zero_init", c.zero_init},
      {"n_coarse", c.n_coarse},
      {"n_fine", c.n_fine},
      {"chunk", c.chunk},
      {"model", fields::to_json(c.model)},
  };
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ContractError("train config must be a JSON object");
  const json known = to_json(TrainConfig{});
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ContractError("train config: unknown key '" + key + "'");
  TrainConfig c;
  try {
    c.lambda = j.value("lambda", c.lambda);
    c.rays = j.value("rays", c.rays);
    c.iterations = j.value("iterations", c.iterations);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
    c.epoch_length = j.value("epoch_length", c.epoch_length);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.dynamic_sampling = j.value("dynamic_sampling", c.dynamic_sampling);
    c.zero_init = j.value("zero_init", c.zero_init);
    c.n_coarse = j.value("n_coarse", c.n_coarse);
    c.n_fine = j.value("n_fine", c.n_fine);
    c.chunk = j.value("chunk", c.chunk);
    if (j.contains("model")) c.model = fields::model_config_from_json(j["model"]);
  } catch (const json::exception& e) {
    throw ContractError(std::string("train config: ") + e.what());
  }
  if (!(c.lambda >= 0.0)) throw ContractError("train config: lambda must be >= 0");
  if (c.rays == 0) throw ContractError("train config: rays must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ContractError("train config: learning rate must be positive");
  return c;
}

render::RenderConfig render_config(const io::DatasetMeta& meta, const TrainConfig& config) {
  render::RenderConfig r;
  r.n_coarse = config.n_coarse;
  r.n_fine = config.n_fine;
  r.near = meta.near;
  r.far = meta.far;
  r.intrinsics = meta.intrinsics;
  r.box = meta.box;
  r.background_class = 0;
  r.chunk = config.chunk;
  return r;
}

std::vector<fields::Vec3> normalized_anchors(const io::Dataset& dataset) {
  std::vector<fields::Vec3> out;
  for (const auto& a : dataset.anchors()) out.push_back(dataset.meta().box.normalize(a));
  return out;
}

fields::FrameConditioning condition_frame(const fields::PortraitModel& model, const io::Dataset& dataset,
                                          std::size_t frame) {
  const auto& m = dataset.meta();
  const auto window = dataset.audio_window(frame, model.config().audio.window);
  return model.condition(&window, m.time(frame), m.box.normalize(dataset.poses()[frame]),
                         m.box.normalize(dataset.poses()[0]));
}

render::FrameImage render_dataset_frame(const fields::PortraitModel& model, const io::Dataset& dataset,
                                        const render::RenderConfig& config, std::size_t frame, std::size_t threads) {
  num::Tape::Pause no_grad;
  const auto cond = condition_frame(model, dataset, frame);
  return render::render_frame(model, cond, dataset.poses()[frame], dataset.meta().time(frame), dataset.background(),
                              config, threads);
}

TrainConfig resolve_config(TrainConfig config, const io::DatasetMeta& meta) {
  config.model.semantic.classes = meta.classes();
  config.model.audio.raw_dim = meta.audio_dim;
  return config;
}

Trainer::Trainer(const io::Dataset& dataset, const TrainConfig& config)
    : dataset_(dataset), config_(resolve_config(config, dataset.meta())), adam_(num::AdamConfig{.lr = config.learning_rate}) {
  const auto& meta = dataset.meta();
  if (config_.rays == 0) throw ContractError("Trainer: rays must be >= 1");
  if (!(config_.lambda >= 0.0)) throw ContractError("Trainer: lambda must be >= 0");
  render_ = render_config(meta, config_);
  model_ = fields::PortraitModel(config_.model, normalized_anchors(dataset));
  if (!config_.zero_init) model_.init_random(config_.seed);
  params_ = model_.parameters();
  for (const auto& p : params_) tensors_.push_back(p.tensor);
  stats_ = sched::ClassLossStats(meta.classes());
  epoch_length_ = config_.epoch_length > 0 ? config_.epoch_length : meta.train.size();
  frame_slot_.assign(meta.frames, meta.frames);
  for (std::size_t i = 0; i < meta.train.size(); ++i) {
    frame_slot_[meta.train[i]] = i;
    frames_.push_back(dataset.frame(meta.train[i]));
  }
}

void Trainer::begin_epoch(std::ostream* log) {
  const std::size_t epoch = iteration_ / epoch_length_;
  if (iteration_ > 0) stats_.end_epoch();
  order_ = dataset_.meta().train;
  num::Rng rng(num::mix_seed({config_.seed, 0x65706f6368ULL, epoch}));
  for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
  if (log != nullptr) {
    std::vector<std::size_t> everyone(stats_.classes());
    std::iota(everyone.begin(), everyone.end(), std::size_t{0});
    json entry = {{"type", "epoch"},
                  {"epoch", epoch},
                  {"iteration", iteration_},
                  {"sampling", epoch == 0 || !config_.dynamic_sampling ? "uniform" : "dynamic"},
                  {"class_average_loss", stats_.averages()}};
    if (config_.rays >= everyone.size()) entry["allocation"] = sched::allocate(stats_, config_.rays, everyone).counts;
    *log << entry.dump() << '\n';
  }
}

LossReport Trainer::step() {
  if (iteration_ % epoch_length_ == 0) begin_epoch(log_);
  const auto& meta = dataset_.meta();
  const std::size_t epoch = iteration_ / epoch_length_;
  const std::size_t frame = order_[(iteration_ % epoch_length_) % order_.size()];
  const auto& rec = frames_[frame_slot_[frame]];
  const std::size_t k = meta.classes();
  const std::size_t pixels = meta.width * meta.height;

  num::Rng pick(num::mix_seed({config_.seed, 0x7069636bULL, iteration_}));
  std::vector<std::size_t> chosen;
  if (epoch == 0 || !config_.dynamic_sampling) {
    chosen = sched::select_uniform(config_.rays, pixels, pick);
  } else {
    const auto present = sched::present_classes(rec.labels, k);
    chosen = sched::select_pixels(sched::allocate(stats_, config_.rays, present), rec.labels, pick);
  }

  const std::size_t n = chosen.size();
  render::RayBatch batch;
  std::vector<double> truth(n * 3);
  std::vector<std::uint8_t> labels(n);
  batch.rays.reserve(n);
  batch.background.resize(n * 3);
  batch.streams.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t p = chosen[r];
    const double u = static_cast<double>(p % meta.width) + 0.5, v = static_cast<double>(p / meta.width) + 0.5;
    batch.rays.push_back(render::generate_ray(rec.pose, render_.intrinsics, u, v, rec.time, render_.near, render_.far));
    for (std::size_t c = 0; c < 3; ++c) {
      batch.background[r * 3 + c] = dataset_.background()[p * 3 + c];
      truth[r * 3 + c] = rec.rgb[p * 3 + c];
    }
    labels[r] = rec.labels[p];
    batch.streams[r] = num::mix_seed({config_.seed, frame, p, iteration_});
  }

  LossReport report;
  report.iteration = iteration_;
  report.frame = frame;
  try {
    num::Tape tape;
    num::Tape::Scope scope(tape);
    const auto cond = condition_frame(model_, dataset_, frame);
    const auto out = render::render_rays(model_, cond, batch, render_);
    const Tensor lp = photometric_loss(out.coarse.rgb, out.fine.rgb, truth);
    const Tensor ls = semantic_loss(out.coarse.semantic, out.fine.semantic, labels);
    const Tensor total = total_loss(lp, ls, config_.lambda);
    report.photometric = lp.item();
    report.semantic = ls.item();
    report.total = total.item();
    if (!std::isfinite(report.total)) throw NumericError("non-finite loss");

    // Per-ray losses feed the class statistics.
    report.class_loss.assign(k, 0.0);
    report.class_rays.assign(k, 0);
    const auto cc = out.coarse.rgb.values(), cf = out.fine.rgb.values();
    const auto pc = out.coarse.semantic.values(), pf = out.fine.semantic.values();
    for (std::size_t r = 0; r < n; ++r) {
      const double rgb = photometric_loss(cc.subspan(r * 3, 3), cf.subspan(r * 3, 3),
                                          std::span<const double>(truth).subspan(r * 3, 3));
      const double sem = semantic_loss(pc.subspan(r * k, k), pf.subspan(r * k, k),
                                       std::span<const std::uint8_t>(labels).subspan(r, 1), k);
      stats_.record(labels[r], rgb, sem);
      report.class_loss[labels[r]] += rgb + sem;
      ++report.class_rays[labels[r]];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (report.class_rays[c] > 0) report.class_loss[c] /= static_cast<double>(report.class_rays[c]);

    tape.backward(total);
    adam_.step(tensors_);
  } catch (const NumericError& e) {
    std::ostringstream msg;
    msg << "training diverged at iteration " << iteration_ << ", frame " << frame << ", pixel batch of " << n
        << " rays starting at pixels [";
    for (std::size_t r = 0; r < std::min<std::size_t>(n, 8); ++r) msg << (r ? ", " : "") << chosen[r];
    msg << (n > 8 ? ", ...]" : "]") << ": " << e.what();
    throw NumericError(msg.str());
  }
  ++iteration_;
  return report;
}

void Trainer::run(std::ostream* log, const std::filesystem::path& checkpoint_base,
                  const std::function<void(const LossReport&)>& on_step) {
  log_ = log;
  while (iteration_ < config_.iterations) {
    const auto r = step();
    if (log != nullptr) {
      *log << json{{"type", "iteration"},
                   {"iteration", r.iteration},
                   {"frame", r.frame},
                   {"photometric", r.photometric},
                   {"semantic", r.semantic},
                   {"total", r.total}}
                  .dump()
           << '\n';
    }
    if (on_step) on_step(r);
    if (!checkpoint_base.empty() && config_.checkpoint_every > 0 && iteration_ % config_.checkpoint_every == 0 &&
        iteration_ < config_.iterations) {
      save(checkpoint_base);
    }
  }
  if (log != nullptr) log->flush();
  if (!checkpoint_base.empty()) save(checkpoint_base);
  log_ = nullptr;
}

void Trainer::save(const std::filesystem::path& base) const {
  json anchors = json::array();
  for (const auto& a : model_.anchors()) anchors.push_back(a);
  const auto& m = dataset_.meta();
  const json meta = {{"kind", "pnerf-model"},
                     {"iteration", iteration_},
                     {"train", to_json(config_)},
                     {"anchors", anchors},
                     {"dataset", {{"frames", m.frames}, {"width", m.width}, {"height", m.height}, {"classes", m.classes()}}}};
  num::save_checkpoint(base, params_, meta);
}

LoadedModel load_model(const std::filesystem::path& checkpoint, const io::Dataset& dataset) {
  const auto ckpt = num::load_checkpoint(checkpoint);
  if (ckpt.meta.value("kind", "") != "pnerf-model") throw IoError(checkpoint.string() + " is not a model checkpoint");
  LoadedModel out;
  out.meta = ckpt.meta;
  out.config = train_config_from_json(ckpt.meta.at("train"));
  const auto& m = dataset.meta();
  const auto& d = ckpt.meta.at("dataset");
  if (d.at("classes").get<std::size_t>() != m.classes() || d.at("width").get<std::size_t>() != m.width ||
      d.at("height").get<std::size_t>() != m.height) {
    throw ValidationError("checkpoint was trained on a dataset with different size or classes");
  }
  std::vector<fields::Vec3> anchors;
  for (const auto& a : ckpt.meta.at("anchors")) anchors.push_back(a.get<fields::Vec3>());
  out.model = fields::PortraitModel(out.config.model, anchors);
  auto params = out.model.parameters();
  num::assign_parameters(ckpt, params);
  return out;
}

}  // namespace pnerf::train
