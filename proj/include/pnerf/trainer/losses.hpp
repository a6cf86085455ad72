#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pnerf/numerics/tensor.hpp"

namespace pnerf::train {

inline constexpr double kLogClamp = 1e-12;

// Per-ray -log max(p[label], clamp) -> [R, 1]. The gradient is zero where the
// clamp is active.
num::Tensor class_nll(const num::Tensor& probs, std::span<const std::uint8_t> labels, double clamp = kLogClamp);

// (sum_r |c_r - C_r|^2 + |f_r - C_r|^2) / R; truth is [R * 3].
num::Tensor photometric_loss(const num::Tensor& coarse, const num::Tensor& fine, std::span<const double> truth);

// -(sum_r log p_c[label_r] + log p_f[label_r]) / R, logs clamped at 1e-12.
num::Tensor semantic_loss(const num::Tensor& coarse, const num::Tensor& fine, std::span<const std::uint8_t> labels);

// L_p + lambda * L_s.
num::Tensor total_loss(const num::Tensor& photometric, const num::Tensor& semantic, double lambda);
double total_loss(double photometric, double semantic, double lambda);

// Scalar references on plain arrays (single ray or batch), for reporting.
double photometric_loss(std::span<const double> coarse, std::span<const double> fine, std::span<const double> truth);
double semantic_loss(std::span<const double> coarse, std::span<const double> fine, std::span<const std::uint8_t> labels,
                     std::size_t classes);

}  // namespace pnerf::train
