#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "pnerf/dataio/dataset.hpp"
#include "pnerf/dataio/png.hpp"
#include "pnerf/fields/portrait_model.hpp"
#include "pnerf/renderer/render.hpp"

namespace pnerf::eval {

// Per-pixel sum_i w_i |dx_i| along each camera ray of a frame, in normalized
// scene units. The image maps [0, scale] to [0, 255]; scale is the frame
// maximum (0 for an all-zero map).
struct Heatmap {
  std::size_t frame = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
  double scale = 0.0;
  io::Image8 image;
};

// Throws ContractError when the frame is out of range.
Heatmap deformation_heatmap(const fields::PortraitModel& model, const io::Dataset& dataset,
                            const render::RenderConfig& config, std::size_t frame, std::size_t threads = 1);

nlohmann::json heatmap_sidecar(const Heatmap& heatmap);
// Writes the PNG and `<png>.json` next to it.
void write_heatmap(const Heatmap& heatmap, const std::filesystem::path& png);

// Mean heatmap value over the pixels of each ground-truth class; nullopt for
// classes with no pixels.
std::vector<std::optional<double>> class_means(std::span<const double> values, std::span<const std::uint8_t> labels,
                                               std::size_t classes);

}  // namespace pnerf::eval
