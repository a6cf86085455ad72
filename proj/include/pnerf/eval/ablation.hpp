#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnerf/dataio/dataset.hpp"
#include "pnerf/eval/report.hpp"
#include "pnerf/trainer/trainer.hpp"

namespace pnerf::eval {

// Trains `config` on `dataset`, writing `<base>` (checkpoint) and
// `<base>.log.jsonl`. With `reuse`, an existing checkpoint whose stored
// training config equals `config` and that reached the full iteration count
// is loaded instead of retrained.
train::LoadedModel train_or_reuse(const io::Dataset& dataset, const train::TrainConfig& config,
                                  const std::filesystem::path& base, bool reuse, std::ostream* progress = nullptr);

struct AblationVariant {
  std::string name;
  train::TrainConfig config;
};
// The flag matrix: the full model, --no-deform and --no-dynamic-sampling,
// all with the budget of `base`.
std::vector<AblationVariant> ablation_variants(const train::TrainConfig& base);

// Class with the smallest mean pixel area over the training frames.
std::size_t smallest_class(const io::Dataset& dataset);

struct AblationOptions {
  std::filesystem::path out_dir;
  bool reuse = false;
  std::size_t threads = 1;
  std::ostream* progress = nullptr;
};

struct AblationRun {
  AblationVariant variant;
  train::LoadedModel model;
  MetricReport train;
  MetricReport holdout;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  nlohmann::json summary;

  const AblationRun& run(const std::string& name) const;
};

// Trains (or reuses) every variant, evaluates train and holdout splits and
// summarizes the deformation and dynamic-sampling comparisons.
AblationResult run_ablation(const io::Dataset& dataset, const train::TrainConfig& base, const AblationOptions& options);

}  // namespace pnerf::eval
