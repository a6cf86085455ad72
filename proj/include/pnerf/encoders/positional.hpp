#pragma once

#include <cstddef>
#include <vector>

#include "pnerf/numerics/tensor.hpp"

namespace pnerf::enc {

struct EncoderConfig {
  int levels_x = 10;  // 3D coordinates
  int levels_d = 4;   // view direction and time
  bool include_raw = true;
};

// Width of the encoding of one scalar: 2L, plus one when the raw value is kept.
constexpr std::size_t encoded_width(int levels, bool include_raw) {
  return 2 * static_cast<std::size_t>(levels) + (include_raw ? 1 : 0);
}

// Encodes every element of q[n, c] as (q, sin(2^0 pi q), cos(2^0 pi q), ...,
// sin(2^(L-1) pi q), cos(2^(L-1) pi q)), raw value first when include_raw.
// Output is [n, c * encoded_width(L, include_raw)], scalar blocks in column
// order. Differentiable with respect to q.
num::Tensor positional_encode(const num::Tensor& q, int levels, bool include_raw);

// Plain-value helper for a single scalar.
std::vector<double> positional_encode(double q, int levels, bool include_raw);

}  // namespace pnerf::enc
