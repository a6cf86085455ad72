#include "pnerf/eval/ablation.hpp"

#include <chrono>
#include <fstream>

#include "pnerf/numerics/checkpoint.hpp"

namespace pnerf::eval {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> difference(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

json aggregate(const MetricReport& r) { return to_json(r)["aggregate"]; }

}  // namespace

train::LoadedModel train_or_reuse(const io::Dataset& dataset, const train::TrainConfig& config,
                                  const std::filesystem::path& base, bool reuse, std::ostream* progress) {
  if (reuse && std::filesystem::exists(num::checkpoint_manifest_path(base))) {
    try {
      auto loaded = train::load_model(base, dataset);
      if (loaded.meta.at("train") == train::to_json(train::resolve_config(config, dataset.meta())) &&
          loaded.meta.at("iteration").get<std::size_t>() == config.iterations) {
        if (progress != nullptr) *progress << "reusing " << base.string() << '\n';
        return loaded;
      }
    } catch (const std::exception& e) {
      if (progress != nullptr) *progress << "not reusing " << base.string() << ": " << e.what() << '\n';
    }
  }
  if (!base.parent_path().empty()) std::filesystem::create_directories(base.parent_path());
  std::filesystem::path log_path = base;
  log_path += ".log.jsonl";
  std::ofstream log(log_path);
  if (!log) throw IoError("cannot write " + log_path.string());
  train::Trainer trainer(dataset, config);
  const auto start = std::chrono::steady_clock::now();
  trainer.run(&log, base, [&](const train::LossReport& r) {
    if (progress != nullptr && (r.iteration + 1) % 1000 == 0) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      *progress << base.filename().string() << ": iteration " << r.iteration + 1 << "/" << config.iterations
                << ", loss " << r.total << ", " << s << " s" << std::endl;
    }
  });
  return train::load_model(base, dataset);
}

std::vector<AblationVariant> ablation_variants(const train::TrainConfig& base) {
  std::vector<AblationVariant> out;
  auto full = base;
  full.model.use_deform = true;
  full.dynamic_sampling = true;
  out.push_back({"full", full});
  auto no_deform = full;
  no_deform.model.use_deform = false;
  out.push_back({"no_deform", no_deform});
  auto no_dynamic = full;
  no_dynamic.dynamic_sampling = false;
  out.push_back({"no_dynamic_sampling", no_dynamic});
  return out;
}

std::size_t smallest_class(const io::Dataset& dataset) {
  const auto& meta = dataset.meta();
  std::vector<std::size_t> area(meta.classes(), 0);
  for (const std::size_t f : meta.train)
    for (const auto l : dataset.frame(f).labels) ++area[l];
  std::size_t best = 0;
  for (std::size_t c = 1; c < area.size(); ++c)
    if (area[c] < area[best]) best = c;
  return best;
}

const AblationRun& AblationResult::run(const std::string& name) const {
  for (const auto& r : runs)
    if (r.variant.name == name) return r;
  throw ContractError("ablation: no run named '" + name + "'");
}

AblationResult run_ablation(const io::Dataset& dataset, const train::TrainConfig& base, const AblationOptions& options) {
  AblationResult result;
  const auto& meta = dataset.meta();
  for (const auto& v : ablation_variants(base)) {
    auto model = train_or_reuse(dataset, v.config, options.out_dir / v.name, options.reuse, options.progress);
    const auto rc = train::render_config(meta, model.config);
    auto tr = evaluate_frames(model.model, dataset, rc, meta.train, "train", options.threads);
    auto ho = evaluate_frames(model.model, dataset, rc, meta.holdout, "holdout", options.threads);
    result.runs.push_back({v, std::move(model), std::move(tr), std::move(ho)});
  }

  const auto& full = result.run("full");
  const auto& no_deform = result.run("no_deform");
  const auto& no_dynamic = result.run("no_dynamic_sampling");
  const std::size_t small = smallest_class(dataset);
  const std::string small_name = meta.class_names[small];

  json variants = json::object();
  for (const auto& r : result.runs) {
    variants[r.variant.name] = {{"config", train::to_json(r.variant.config)},
                                {"train", aggregate(r.train)},
                                {"holdout", aggregate(r.holdout)}};
  }
  const auto torso_drop = difference(full.holdout.region_psnr("torso"), no_deform.holdout.region_psnr("torso"));
  const auto head_drop = difference(full.holdout.region_psnr("head"), no_deform.holdout.region_psnr("head"));
  const auto small_adv = difference(full.holdout.region.psnr(small), no_dynamic.holdout.region.psnr(small));
  result.summary = {
      {"variants", variants},
      {"deformation",
       {{"holdout_psnr_drop", full.holdout.psnr - no_deform.holdout.psnr},
        {"torso_psnr_drop", optional_number(torso_drop)},
        {"head_psnr_drop", optional_number(head_drop)}}},
      {"dynamic_sampling",
       {{"smallest_class", small_name},
        {"region_psnr_advantage", optional_number(small_adv)},
        {"region_accuracy_advantage",
         optional_number(difference(full.holdout.class_accuracy(small), no_dynamic.holdout.class_accuracy(small)))},
        {"semantic_accuracy_advantage", full.holdout.semantic_accuracy - no_dynamic.holdout.semantic_accuracy}}},
  };
  return result;
}

}  // namespace pnerf::eval
