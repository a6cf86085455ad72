#include "pnerf/eval/metrics.hpp"

#include <cmath>
#include <string>

#include "pnerf/numerics/tensor.hpp"

namespace pnerf::eval {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": sizes " + std::to_string(a) + " and " + std::to_string(b) + " differ");
}

// Separable "valid" Gaussian filter of a single-channel image.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t w, std::size_t h,
                                 const std::vector<double>& kernel) {
  const std::size_t n = kernel.size(), ow = w - n + 1, oh = h - n + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += kernel[k] * img[y * w + x + k];
      rows[y * ow + x] = s;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += kernel[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double mse(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "mse");
  if (a.empty()) throw ContractError("mse: empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double psnr_from_mse(double m) { return m == 0.0 ? kInfinitePsnr : -10.0 * std::log10(m); }

double psnr(std::span<const double> a, std::span<const double> b) { return psnr_from_mse(mse(a, b)); }

std::vector<double> luminance(std::span<const double> rgb) {
  if (rgb.size() % 3 != 0) throw ShapeError("luminance: RGB size not a multiple of 3");
  std::vector<double> out(rgb.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
  return out;
}

double ssim_gray(std::span<const double> a, std::span<const double> b, std::size_t w, std::size_t h,
                 const SsimConfig& c) {
  require_same(a.size(), b.size(), "ssim");
  require_same(a.size(), w * h, "ssim");
  if (w < c.window || h < c.window) {
    throw ContractError("ssim: image " + std::to_string(w) + "x" + std::to_string(h) + " is smaller than the " +
                        std::to_string(c.window) + "x" + std::to_string(c.window) + " window");
  }
  std::vector<double> kernel(c.window);
  double total = 0.0;
  const double mid = static_cast<double>(c.window - 1) / 2.0;
  for (std::size_t i = 0; i < c.window; ++i) {
    const double d = static_cast<double>(i) - mid;
    kernel[i] = std::exp(-d * d / (2.0 * c.sigma * c.sigma));
    total += kernel[i];
  }
  for (auto& k : kernel) k /= total;

  const std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, w, h, kernel), my = filter_valid(y, w, h, kernel);
  const auto sxx = filter_valid(xx, w, h, kernel), syy = filter_valid(yy, w, h, kernel),
             sxy = filter_valid(xy, w, h, kernel);
  const double c1 = (c.k1 * c.range) * (c.k1 * c.range), c2 = (c.k2 * c.range) * (c.k2 * c.range);
  double sum = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
    sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return sum / static_cast<double>(mx.size());
}

double ssim(std::span<const double> a, std::span<const double> b, std::size_t w, std::size_t h, const SsimConfig& c) {
  require_same(a.size(), b.size(), "ssim");
  return ssim_gray(luminance(a), luminance(b), w, h, c);
}

std::vector<std::uint8_t> argmax_labels(std::span<const double> probs, std::size_t k) {
  if (k == 0 || probs.size() % k != 0) throw ShapeError("argmax_labels: size not a multiple of K");
  std::vector<std::uint8_t> out(probs.size() / k);
  for (std::size_t p = 0; p < out.size(); ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (probs[p * k + c] > probs[p * k + best]) best = c;
    out[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

double semantic_accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  require_same(predicted.size(), truth.size(), "semantic_accuracy");
  if (truth.empty()) throw ContractError("semantic_accuracy: empty maps");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) ok += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(truth.size());
}

void RegionError::add(const RegionError& o) {
  require_same(squared_error.size(), o.squared_error.size(), "RegionError::add");
  for (std::size_t c = 0; c < squared_error.size(); ++c) {
    squared_error[c] += o.squared_error[c];
    pixels[c] += o.pixels[c];
  }
}

std::optional<double> RegionError::psnr(std::size_t cls) const {
  if (pixels.at(cls) == 0) return std::nullopt;
  return psnr_from_mse(squared_error[cls] / (3.0 * static_cast<double>(pixels[cls])));
}

RegionError region_error(std::span<const double> a, std::span<const double> b, std::span<const std::uint8_t> labels,
                         std::size_t k) {
  require_same(a.size(), b.size(), "region_error");
  require_same(a.size(), labels.size() * 3, "region_error");
  RegionError r{std::vector<double>(k, 0.0), std::vector<std::size_t>(k, 0)};
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] >= k) throw ContractError("region_error: label " + std::to_string(labels[p]) + " out of range");
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) s += (a[3 * p + c] - b[3 * p + c]) * (a[3 * p + c] - b[3 * p + c]);
    r.squared_error[labels[p]] += s;
    ++r.pixels[labels[p]];
  }
  return r;
}

}  // namespace pnerf::eval
