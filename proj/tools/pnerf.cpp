// Command-line front end: synth, train, render, eval, heatmap, ablate.
// Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "pnerf/dataio/png.hpp"
#include "pnerf/dataio/synthetic.hpp"
#include "pnerf/eval/ablation.hpp"
#include "pnerf/eval/heatmap.hpp"
#include "pnerf/eval/metrics.hpp"
#include "pnerf/eval/report.hpp"
#include "pnerf/numerics/checkpoint.hpp"
#include "pnerf/numerics/tensor.hpp"
#include "pnerf/trainer/trainer.hpp"

using namespace pnerf;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3 };

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config file " + path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

// Training options shared by `train` and `ablate`: a JSON config file
// overridden by individual flags.
struct TrainFlags {
  std::string config;
  std::optional<std::size_t> iters, rays, seed;
  std::optional<double> lambda, lr;
  bool no_deform = false, no_dynamic = false, no_latent = false, zero_init = false;

  void add(CLI::App* app) {
    app->add_option("--config", config, "training config JSON file");
    app->add_option("--iters", iters, "iterations");
    app->add_option("--rays", rays, "rays per batch");
    app->add_option("--lambda", lambda, "semantic loss weight");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--seed", seed, "random seed");
    app->add_flag("--no-deform", no_deform, "disable the deformation module");
    app->add_flag("--no-dynamic-sampling", no_dynamic, "sample rays uniformly in every epoch");
    app->add_flag("--no-latent", no_latent, "disable the latent code volume");
    app->add_flag("--zero-init", zero_init, "start from all-zero parameters");
  }

  train::TrainConfig resolve() const {
    train::TrainConfig c;
    try {
      if (!config.empty()) c = train::train_config_from_json(read_json_file(config));
    } catch (const ContractError& e) {
      throw ValidationError(e.what());
    }
    if (iters) c.iterations = *iters;
    if (rays) c.rays = *rays;
    if (seed) c.seed = *seed;
    if (lambda) c.lambda = *lambda;
    if (lr) c.learning_rate = *lr;
    if (no_deform) c.model.use_deform = false;
    if (no_dynamic) c.dynamic_sampling = false;
    if (no_latent) c.model.use_latent = false;
    if (zero_init) c.zero_init = true;
    if (c.rays == 0) throw ValidationError("--rays must be >= 1");
    if (!(c.lambda >= 0.0)) throw ValidationError("--lambda must be >= 0");
    if (!(c.learning_rate > 0.0)) throw ValidationError("--lr must be positive");
    return c;
  }
};

void require_frame(const io::Dataset& ds, std::size_t frame) {
  if (frame >= ds.meta().frames) {
    throw ValidationError("frame " + std::to_string(frame) + " out of range [0, " +
                          std::to_string(ds.meta().frames) + ")");
  }
}

}  // namespace

int main(int argc, char** argv) {
  num::tune_allocator();
  CLI::App app{"Semantic-aware dynamic radiance fields for speaking portraits"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "render worker threads")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "generate the synthetic portrait dataset");
  std::string synth_out, synth_config;
  std::optional<std::size_t> synth_frames, synth_size, synth_seed;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--config", synth_config, "scene config JSON file");
  synth->add_option("--frames", synth_frames, "frame count");
  synth->add_option("--size", synth_size, "image width and height (focal scales with it)");
  synth->add_option("--seed", synth_seed, "random seed");

  auto* trn = app.add_subcommand("train", "train a model");
  std::string data, ckpt, out, log_path;
  TrainFlags train_flags;
  trn->add_option("--data", data, "dataset directory")->required();
  trn->add_option("--out", out, "checkpoint base path")->required();
  trn->add_option("--log", log_path, "train log (default <out>.log.jsonl)");
  train_flags.add(trn);

  auto* rnd = app.add_subcommand("render", "render one frame");
  std::size_t frame = 0;
  std::string semantic_out;
  rnd->add_option("--ckpt", ckpt, "checkpoint base path")->required();
  rnd->add_option("--data", data, "dataset directory")->required();
  rnd->add_option("--frame", frame, "frame index")->required();
  rnd->add_option("--out", out, "RGB PNG")->required();
  rnd->add_option("--semantic-out", semantic_out, "class-id PNG");

  auto* evl = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string split = "holdout";
  evl->add_option("--ckpt", ckpt, "checkpoint base path")->required();
  evl->add_option("--data", data, "dataset directory")->required();
  evl->add_option("--split", split, "train, holdout or all");
  evl->add_option("--out", out, "report JSON")->required();

  auto* heat = app.add_subcommand("heatmap", "export the deformation heatmap of a frame");
  heat->add_option("--ckpt", ckpt, "checkpoint base path")->required();
  heat->add_option("--data", data, "dataset directory")->required();
  heat->add_option("--frame", frame, "frame index")->required();
  heat->add_option("--out", out, "heatmap PNG (sidecar at <out>.json)")->required();

  auto* abl = app.add_subcommand("ablate", "train and compare full, no-deform and no-dynamic-sampling models");
  bool reuse = false;
  TrainFlags ablate_flags;
  abl->add_option("--data", data, "dataset directory")->required();
  abl->add_option("--out", out, "output directory")->required();
  abl->add_flag("--reuse", reuse, "reuse finished checkpoints with identical configs");
  ablate_flags.add(abl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (synth->parsed()) {
      io::SynthSceneConfig c;
      if (!synth_config.empty()) c = io::synth_config_from_json(read_json_file(synth_config));
      if (synth_frames) c.frames = *synth_frames;
      if (synth_size) {
        c.focal *= static_cast<double>(*synth_size) / static_cast<double>(c.width);
        c.width = c.height = *synth_size;
      }
      if (synth_seed) c.seed = *synth_seed;
      io::generate_synthetic(c, synth_out);
      std::cout << "wrote " << c.frames << " frames to " << synth_out << '\n';
    } else if (trn->parsed()) {
      const auto cfg = train_flags.resolve();
      const auto ds = io::load_dataset(data);
      if (log_path.empty()) log_path = out + ".log.jsonl";
      std::ofstream log(log_path);
      if (!log) throw IoError("cannot write " + log_path);
      train::Trainer trainer(ds, cfg);
      trainer.run(&log, out, [&](const train::LossReport& r) {
        if ((r.iteration + 1) % 100 == 0 || r.iteration + 1 == cfg.iterations)
          std::cout << "iteration " << r.iteration + 1 << " loss " << r.total << std::endl;
      });
      std::cout << "checkpoint " << out << '\n';
    } else if (rnd->parsed()) {
      const auto ds = io::load_dataset(data);
      require_frame(ds, frame);
      const auto m = train::load_model(ckpt, ds);
      const auto img =
          train::render_dataset_frame(m.model, ds, train::render_config(ds.meta(), m.config), frame, threads);
      io::write_png(out, {img.width, img.height, 3, io::to_bytes(img.rgb)});
      if (!semantic_out.empty())
        io::write_png(semantic_out, {img.width, img.height, 1, eval::argmax_labels(img.semantic, img.classes)});
    } else if (evl->parsed()) {
      const auto ds = io::load_dataset(data);
      const auto frames = eval::split_frames(ds.meta(), split);
      const auto m = train::load_model(ckpt, ds);
      const auto report = eval::evaluate_frames(m.model, ds, train::render_config(ds.meta(), m.config), frames,
                                                split, threads);
      write_json_file(out, eval::to_json(report));
      std::cout << split << ": psnr " << report.psnr << " ssim " << report.ssim << " sem_acc "
                << report.semantic_accuracy << '\n';
    } else if (heat->parsed()) {
      const auto ds = io::load_dataset(data);
      require_frame(ds, frame);
      const auto m = train::load_model(ckpt, ds);
      const auto h =
          eval::deformation_heatmap(m.model, ds, train::render_config(ds.meta(), m.config), frame, threads);
      eval::write_heatmap(h, out);
      std::cout << "heatmap scale " << h.scale << '\n';
    } else if (abl->parsed()) {
      const auto cfg = ablate_flags.resolve();
      const auto ds = io::load_dataset(data);
      std::filesystem::create_directories(out);
      const auto result = eval::run_ablation(ds, cfg, {out, reuse, threads, &std::cout});
      write_json_file((std::filesystem::path(out) / "ablation.json").string(), result.summary);
      std::cout << result.summary["deformation"].dump() << '\n' << result.summary["dynamic_sampling"].dump() << '\n';
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const ContractError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
