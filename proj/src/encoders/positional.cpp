#include "pnerf/encoders/positional.hpp"

#include <cmath>
#include <numbers>

namespace pnerf::enc {

namespace {

void encode_scalar(double q, int levels, bool include_raw, double* out) {
  if (include_raw) *out++ = q;
  // Double-angle recurrence from the base frequency: one sin/cos pair per
  // scalar, with error growing roughly 2x per level (~1e-13 at L = 10).
  double s = std::sin(std::numbers::pi * q), c = std::cos(std::numbers::pi * q);
  for (int l = 0; l < levels; ++l) {
    *out++ = s;
    *out++ = c;
    const double s2 = 2.0 * s * c;
    c = (c - s) * (c + s);
    s = s2;
  }
}

}  // namespace

std::vector<double> positional_encode(double q, int levels, bool include_raw) {
  std::vector<double> out(encoded_width(levels, include_raw));
  encode_scalar(q, levels, include_raw, out.data());
  return out;
}

num::Tensor positional_encode(const num::Tensor& q, int levels, bool include_raw) {
  const std::size_t n = q.rows(), c = q.cols();
  const std::size_t w = encoded_width(levels, include_raw);
  std::vector<double> out(n * c * w);
  auto qv = q.values();
  for (std::size_t i = 0; i < n * c; ++i) encode_scalar(qv[i], levels, include_raw, out.data() + i * w);
  return num::make_op("positional_encode", {n, c * w}, std::move(out), {&q},
                      [q, levels, include_raw, w](const num::Node& o) {
                        auto gq = num::grad_sink(q);
                        if (gq.empty()) return;
                        for (std::size_t i = 0; i < gq.size(); ++i) {
                          const double* val = o.value.data() + i * w;
                          const double* g = o.grad.data() + i * w;
                          double acc = 0.0;
                          std::size_t k = 0;
                          if (include_raw) acc += g[k++];
                          double freq = std::numbers::pi;
                          for (int l = 0; l < levels; ++l, freq *= 2.0, k += 2) {
                            // d sin = freq cos, d cos = -freq sin; reuse forward values.
                            acc += freq * (g[k] * val[k + 1] - g[k + 1] * val[k]);
                          }
                          gq[i] += acc;
                        }
                      });
}

}  // namespace pnerf::enc
