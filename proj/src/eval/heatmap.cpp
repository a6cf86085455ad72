#include "pnerf/eval/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pnerf/numerics/checkpoint.hpp"
#include "pnerf/trainer/trainer.hpp"

namespace pnerf::eval {

Heatmap deformation_heatmap(const fields::PortraitModel& model, const io::Dataset& dataset,
                            const render::RenderConfig& config, std::size_t frame, std::size_t threads) {
  const auto& meta = dataset.meta();
  if (frame >= meta.frames) {
    throw ContractError("heatmap: frame " + std::to_string(frame) + " out of range [0, " +
                        std::to_string(meta.frames) + ")");
  }
  const auto img = train::render_dataset_frame(model, dataset, config, frame, threads);
  Heatmap h;
  h.frame = frame;
  h.width = meta.width;
  h.height = meta.height;
  h.values = img.deform;
  h.scale = *std::max_element(h.values.begin(), h.values.end());
  h.image = {meta.width, meta.height, 1, std::vector<std::uint8_t>(h.values.size(), 0)};
  if (h.scale > 0.0) {
    for (std::size_t i = 0; i < h.values.size(); ++i)
      h.image.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(h.values[i] / h.scale, 0.0, 1.0) * 255.0));
  }
  return h;
}

nlohmann::json heatmap_sidecar(const Heatmap& h) {
  double mean = 0.0;
  for (double v : h.values) mean += v / static_cast<double>(h.values.size());
  return {{"frame", h.frame},
          {"width", h.width},
          {"height", h.height},
          {"scale", h.scale},
          {"mean", mean},
          {"units", "normalized scene units; pixel value p means p / 255 * scale"}};
}

void write_heatmap(const Heatmap& h, const std::filesystem::path& png) {
  io::write_png(png, h.image);
  std::filesystem::path side = png;
  side += ".json";
  std::ofstream out(side);
  if (!out) throw IoError("cannot write " + side.string());
  out << heatmap_sidecar(h).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + side.string());
}

std::vector<std::optional<double>> class_means(std::span<const double> values, std::span<const std::uint8_t> labels,
                                               std::size_t k) {
  if (values.size() != labels.size()) throw ShapeError("class_means: one label per value required");
  std::vector<double> sum(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (labels[i] >= k) throw ContractError("class_means: label out of range");
    sum[labels[i]] += values[i];
    ++count[labels[i]];
  }
  std::vector<std::optional<double>> out(k);
  for (std::size_t c = 0; c < k; ++c)
    if (count[c] > 0) out[c] = sum[c] / static_cast<double>(count[c]);
  return out;
}

}  // namespace pnerf::eval
