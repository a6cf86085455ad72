#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnerf/dataio/dataset.hpp"
#include "pnerf/eval/metrics.hpp"
#include "pnerf/fields/portrait_model.hpp"
#include "pnerf/renderer/render.hpp"

namespace pnerf::eval {

struct FrameMetrics {
  std::size_t index = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double semantic_accuracy = 0.0;
  RegionError region;
  std::vector<std::size_t> class_correct;  // pixels of each true class labelled correctly
};

// Aggregates are means over frames, except region PSNR, which pools the
// squared error of each class over all frames (small regions stay stable).
struct MetricReport {
  std::string split;
  std::vector<std::string> class_names;
  std::vector<FrameMetrics> frames;
  double psnr = 0.0;
  double ssim = 0.0;
  double semantic_accuracy = 0.0;
  RegionError region;
  std::vector<std::size_t> class_correct;

  std::optional<double> region_psnr(const std::string& class_name) const;
  // Fraction of the class's pixels labelled correctly, pooled over frames.
  std::optional<double> class_accuracy(std::size_t cls) const;
};

// Schema: {split, frames: [{index, psnr, ssim, sem_acc, region_psnr: {class:
// value}, class_acc: {class: value}}], aggregate: {psnr, ssim, sem_acc,
// region_psnr, class_acc}}. Infinite PSNR is
// written as the string "inf"; absent regions as null.
nlohmann::json to_json(const MetricReport& report);

MetricReport evaluate_frames(const fields::PortraitModel& model, const io::Dataset& dataset,
                             const render::RenderConfig& config, std::span<const std::size_t> frames,
                             const std::string& split, std::size_t threads = 1);

// Frames of a named split: "train", "holdout" or "all". ValidationError otherwise.
std::vector<std::size_t> split_frames(const io::DatasetMeta& meta, const std::string& split);

}  // namespace pnerf::eval
