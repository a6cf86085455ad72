#include "pnerf/eval/report.hpp"

#include <cmath>
#include <numeric>

#include "pnerf/trainer/trainer.hpp"

namespace pnerf::eval {

using nlohmann::json;

namespace {

json number(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

json regions(const RegionError& r, const std::vector<std::string>& names) {
  json out = json::object();
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto p = r.psnr(c);
    out[names[c]] = p ? number(*p) : json(nullptr);
  }
  return out;
}

json accuracies(const std::vector<std::size_t>& correct, const RegionError& r, const std::vector<std::string>& names) {
  json out = json::object();
  for (std::size_t c = 0; c < names.size(); ++c) {
    out[names[c]] = r.pixels[c] == 0 ? json(nullptr)
                                     : json(static_cast<double>(correct[c]) / static_cast<double>(r.pixels[c]));
  }
  return out;
}

}  // namespace

std::optional<double> MetricReport::class_accuracy(std::size_t cls) const {
  if (region.pixels.at(cls) == 0) return std::nullopt;
  return static_cast<double>(class_correct[cls]) / static_cast<double>(region.pixels[cls]);
}

std::optional<double> MetricReport::region_psnr(const std::string& name) const {
  for (std::size_t c = 0; c < class_names.size(); ++c)
    if (class_names[c] == name) return region.psnr(c);
  return std::nullopt;
}

json to_json(const MetricReport& r) {
  json frames = json::array();
  for (const auto& f : r.frames) {
    frames.push_back({{"index", f.index},
                      {"psnr", number(f.psnr)},
                      {"ssim", f.ssim},
                      {"sem_acc", f.semantic_accuracy},
                      {"region_psnr", regions(f.region, r.class_names)},
                      {"class_acc", accuracies(f.class_correct, f.region, r.class_names)}});
  }
  return {{"split", r.split},
          {"frames", frames},
          {"aggregate",
           {{"frames", r.frames.size()},
            {"psnr", number(r.psnr)},
            {"ssim", r.ssim},
            {"sem_acc", r.semantic_accuracy},
            {"region_psnr", regions(r.region, r.class_names)},
            {"class_acc", accuracies(r.class_correct, r.region, r.class_names)}}}};
}

MetricReport evaluate_frames(const fields::PortraitModel& model, const io::Dataset& dataset,
                             const render::RenderConfig& config, std::span<const std::size_t> frames,
                             const std::string& split, std::size_t threads) {
  const auto& meta = dataset.meta();
  if (frames.empty()) throw ContractError("evaluate: no frames to evaluate");
  MetricReport report;
  report.split = split;
  report.class_names = meta.class_names;
  report.region = {std::vector<double>(meta.classes(), 0.0), std::vector<std::size_t>(meta.classes(), 0)};
  report.class_correct.assign(meta.classes(), 0);
  for (const std::size_t f : frames) {
    if (f >= meta.frames) throw ContractError("evaluate: frame " + std::to_string(f) + " out of range");
    const auto img = train::render_dataset_frame(model, dataset, config, f, threads);
    const auto truth = dataset.frame(f);
    FrameMetrics m;
    m.index = f;
    m.psnr = psnr(img.rgb, truth.rgb);
    m.ssim = ssim(img.rgb, truth.rgb, meta.width, meta.height);
    const auto predicted = argmax_labels(img.semantic, meta.classes());
    m.semantic_accuracy = semantic_accuracy(predicted, truth.labels);
    m.region = region_error(img.rgb, truth.rgb, truth.labels, meta.classes());
    m.class_correct.assign(meta.classes(), 0);
    for (std::size_t p = 0; p < predicted.size(); ++p)
      if (predicted[p] == truth.labels[p]) ++m.class_correct[truth.labels[p]];
    report.region.add(m.region);
    for (std::size_t c = 0; c < meta.classes(); ++c) report.class_correct[c] += m.class_correct[c];
    report.frames.push_back(std::move(m));
  }
  const double n = static_cast<double>(report.frames.size());
  for (const auto& f : report.frames) {
    report.psnr += f.psnr / n;
    report.ssim += f.ssim / n;
    report.semantic_accuracy += f.semantic_accuracy / n;
  }
  return report;
}

std::vector<std::size_t> split_frames(const io::DatasetMeta& meta, const std::string& split) {
  if (split == "train") return meta.train;
  if (split == "holdout") return meta.holdout;
  if (split == "all") {
    std::vector<std::size_t> all(meta.frames);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  throw ValidationError("unknown split '" + split + "' (expected train, holdout or all)");
}

}  // namespace pnerf::eval
