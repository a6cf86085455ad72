#include "pnerf/trainer/losses.hpp"

#include <cmath>
#include <string>

#include "pnerf/numerics/ops.hpp"

namespace pnerf::train {

using num::Tensor;

Tensor class_nll(const Tensor& probs, std::span<const std::uint8_t> labels, double clamp) {
  const std::size_t r = probs.rows(), k = probs.cols();
  if (labels.size() != r) throw ShapeError("class_nll: one label per row required");
  std::vector<double> out(r);
  const auto p = probs.values();
  for (std::size_t i = 0; i < r; ++i) {
    if (labels[i] >= k) throw ContractError("class_nll: label " + std::to_string(labels[i]) + " out of range");
    out[i] = -std::log(std::max(p[i * k + labels[i]], clamp));
  }
  return num::make_op("class_nll", {r, 1}, std::move(out), {&probs},
                      [probs, lab = std::vector<std::uint8_t>(labels.begin(), labels.end()), k, clamp](const num::Node& o) {
                        auto g = num::grad_sink(probs);
                        if (g.empty()) return;
                        const auto p = probs.values();
                        for (std::size_t i = 0; i < lab.size(); ++i) {
                          const double v = p[i * k + lab[i]];
                          if (v > clamp) g[i * k + lab[i]] -= o.grad[i] / v;
                        }
                      });
}

Tensor photometric_loss(const Tensor& coarse, const Tensor& fine, std::span<const double> truth) {
  const std::size_t r = coarse.rows();
  if (coarse.cols() != 3 || fine.rows() != r || fine.cols() != 3 || truth.size() != r * 3)
    throw ShapeError("photometric_loss: expected [R, 3] predictions and R * 3 targets");
  const Tensor c = Tensor::from({r, 3}, std::vector<double>(truth.begin(), truth.end()));
  return num::scale(num::sum(num::square(coarse - c)) + num::sum(num::square(fine - c)), 1.0 / static_cast<double>(r));
}

Tensor semantic_loss(const Tensor& coarse, const Tensor& fine, std::span<const std::uint8_t> labels) {
  const std::size_t r = coarse.rows();
  if (fine.rows() != r || fine.cols() != coarse.cols()) throw ShapeError("semantic_loss: coarse/fine shape mismatch");
  return num::scale(num::sum(class_nll(coarse, labels)) + num::sum(class_nll(fine, labels)),
                    1.0 / static_cast<double>(r));
}

Tensor total_loss(const Tensor& photometric, const Tensor& semantic, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("total_loss: lambda must be non-negative");
  return photometric + num::scale(semantic, lambda);
}

double total_loss(double photometric, double semantic, double lambda) { return photometric + lambda * semantic; }

double photometric_loss(std::span<const double> coarse, std::span<const double> fine, std::span<const double> truth) {
  if (coarse.size() != truth.size() || fine.size() != truth.size() || truth.size() % 3 != 0)
    throw ShapeError("photometric_loss: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    s += (coarse[i] - truth[i]) * (coarse[i] - truth[i]) + (fine[i] - truth[i]) * (fine[i] - truth[i]);
  return s / static_cast<double>(truth.size() / 3);
}

double semantic_loss(std::span<const double> coarse, std::span<const double> fine, std::span<const std::uint8_t> labels,
                     std::size_t k) {
  if (coarse.size() != labels.size() * k || fine.size() != coarse.size()) throw ShapeError("semantic_loss: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s -= std::log(std::max(coarse[i * k + labels[i]], kLogClamp));
    s -= std::log(std::max(fine[i * k + labels[i]], kLogClamp));
  }
  return s / static_cast<double>(labels.size());
}

}  // namespace pnerf::train
