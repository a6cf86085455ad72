#include "pnerf/renderer/composite.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "pnerf/numerics/ops.hpp"

namespace pnerf::render {

using num::Tensor;

namespace {

void check_sample(std::span<const double> v, std::size_t width, std::size_t sample, std::size_t n, const char* what) {
  for (std::size_t c = 0; c < width; ++c) {
    if (!std::isfinite(v[sample * width + c])) {
      throw NumericError(std::string("render: non-finite ") + what + " at ray " + std::to_string(sample / n) +
                         ", sample " + std::to_string(sample % n));
    }
  }
}

struct Saved {
  std::vector<double> weights, trans, t_final, probs;
};

}  // namespace

Composite composite(const Tensor& sigma, const Tensor& color, const Tensor& logits, std::span<const double> deltas,
                    std::size_t n, std::span<const double> background, std::size_t bg_class) {
  if (n == 0) throw ShapeError("composite: zero samples per ray");
  const std::size_t s_total = sigma.rows();
  const std::size_t k = logits.cols();
  if (s_total % n != 0 || sigma.cols() != 1 || color.rows() != s_total || color.cols() != 3 ||
      logits.rows() != s_total || deltas.size() != s_total) {
    throw ShapeError("composite: inconsistent sample tensors");
  }
  const std::size_t rays = s_total / n;
  if (background.size() != rays * 3) throw ShapeError("composite: background must hold 3 values per ray");
  if (bg_class >= k) throw ContractError("composite: background class out of range");

  const auto sv = sigma.values(), cv = color.values(), lv = logits.values();
  for (std::size_t i = 0; i < s_total; ++i) {
    check_sample(sv, 1, i, n, "density");
    check_sample(cv, 3, i, n, "color");
    check_sample(lv, k, i, n, "logits");
  }

  auto saved = std::make_shared<Saved>();
  saved->weights.resize(s_total);
  saved->trans.resize(s_total);
  saved->t_final.resize(rays);
  saved->probs.resize(s_total * k);
  const std::size_t width = 3 + k;
  std::vector<double> out(rays * width, 0.0);

  for (std::size_t r = 0; r < rays; ++r) {
    double t = 1.0;
    double* o = out.data() + r * width;
    for (std::size_t i = r * n; i < (r + 1) * n; ++i) {
      const double alpha = -std::expm1(-sv[i] * deltas[i]);
      const double w = t * alpha;
      saved->trans[i] = t;
      saved->weights[i] = w;
      t *= 1.0 - alpha;
      for (std::size_t c = 0; c < 3; ++c) o[c] += w * cv[i * 3 + c];
      const double* s = lv.data() + i * k;
      double* q = saved->probs.data() + i * k;
      const double mx = *std::max_element(s, s + k);
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) z += (q[c] = std::exp(s[c] - mx));
      for (std::size_t c = 0; c < k; ++c) {
        q[c] /= z;
        o[3 + c] += w * q[c];
      }
    }
    saved->t_final[r] = t;
    for (std::size_t c = 0; c < 3; ++c) o[c] += t * background[r * 3 + c];
    o[3 + bg_class] += t;
  }

  std::vector<double> bg(background.begin(), background.end());
  const bool needs_grad = sigma.requires_grad() || color.requires_grad() || logits.requires_grad();
  Tensor joint = num::make_op(
      "composite", {rays, width}, std::move(out), needs_grad,
      [sigma, color, logits, saved, bg = std::move(bg), d = std::vector<double>(deltas.begin(), deltas.end()), n, k,
       rays, width, bg_class](const num::Node& o) {
        auto g_sigma = num::grad_sink(sigma);
        auto g_color = num::grad_sink(color);
        auto g_logits = num::grad_sink(logits);
        const auto cv = color.values();
        std::vector<double> a(n);
        for (std::size_t r = 0; r < rays; ++r) {
          const double* g = o.grad.data() + r * width;
          const double* gp = g + 3;
          // a_i = g . (c_i, q_i), the sensitivity to the weight of sample i.
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t i = r * n + j;
            const double* q = saved->probs.data() + i * k;
            double v = 0.0;
            for (std::size_t c = 0; c < 3; ++c) v += g[c] * cv[i * 3 + c];
            double gq = 0.0;
            for (std::size_t c = 0; c < k; ++c) gq += gp[c] * q[c];
            a[j] = v + gq;
            const double w = saved->weights[i];
            if (!g_color.empty())
              for (std::size_t c = 0; c < 3; ++c) g_color[i * 3 + c] += w * g[c];
            if (!g_logits.empty())
              for (std::size_t c = 0; c < k; ++c) g_logits[i * k + c] += w * q[c] * (gp[c] - gq);
          }
          if (g_sigma.empty()) continue;
          const double tf = saved->t_final[r];
          double b = gp[bg_class];
          for (std::size_t c = 0; c < 3; ++c) b += g[c] * bg[r * 3 + c];
          // Suffix sums of w_i a_i, accumulated back to front.
          double tail = tf * b;
          for (std::size_t j = n; j-- > 0;) {
            const std::size_t i = r * n + j;
            const double t_next = j + 1 < n ? saved->trans[i + 1] : tf;
            g_sigma[i] += d[i] * (t_next * a[j] - tail);
            tail += saved->weights[i] * a[j];
          }
        }
      });

  Composite result;
  result.rgb = num::slice_cols(joint, 0, 3);
  result.semantic = num::slice_cols(joint, 3, k);
  result.weights = saved->weights;
  result.transmittance = saved->trans;
  result.t_final = saved->t_final;
  return result;
}

}  // namespace pnerf::render
