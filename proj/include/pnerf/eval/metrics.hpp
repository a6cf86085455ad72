#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

// Image and label metrics. RGB images are interleaved [H * W * 3] in [0, 1].
namespace pnerf::eval {

// PSNR of identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

double mse(std::span<const double> a, std::span<const double> b);
// 10 log10(1 / mse); kInfinitePsnr when mse is zero.
double psnr_from_mse(double mse);
double psnr(std::span<const double> a, std::span<const double> b);

// Rec. 601 luma of an interleaved RGB image.
std::vector<double> luminance(std::span<const double> rgb);

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};
// Mean SSIM over all valid (unpadded) window positions of the luminance.
// Throws ContractError when the image is smaller than the window.
double ssim(std::span<const double> a, std::span<const double> b, std::size_t width, std::size_t height,
            const SsimConfig& config = {});
// Same, on single-channel images.
double ssim_gray(std::span<const double> a, std::span<const double> b, std::size_t width, std::size_t height,
                 const SsimConfig& config = {});

// Per-pixel argmax of [P * K] class probabilities (ties to the lower id).
std::vector<std::uint8_t> argmax_labels(std::span<const double> probs, std::size_t classes);
double semantic_accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

// Squared-error sum and pixel count of the pixels whose true label is each
// class; PSNR per class follows from sum / (3 * count).
struct RegionError {
  std::vector<double> squared_error;
  std::vector<std::size_t> pixels;
  void add(const RegionError& other);
  std::optional<double> psnr(std::size_t cls) const;
};
RegionError region_error(std::span<const double> a, std::span<const double> b, std::span<const std::uint8_t> labels,
                         std::size_t classes);

}  // namespace pnerf::eval
