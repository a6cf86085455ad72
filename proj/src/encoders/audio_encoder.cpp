#include "pnerf/encoders/audio_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "pnerf/numerics/ops.hpp"

namespace pnerf::enc {

using num::Tensor;

AudioWindow make_audio_window(const std::vector<double>& sequence, std::size_t frames, std::size_t raw_dim,
                              std::size_t center, std::size_t length) {
  if (frames == 0 || sequence.size() != frames * raw_dim) {
    throw ShapeError("make_audio_window: sequence does not hold " + std::to_string(frames) + " rows of " +
                     std::to_string(raw_dim));
  }
  if (center >= frames) throw ContractError("make_audio_window: centre frame out of range");
  AudioWindow w{length, raw_dim, center, std::vector<double>(length * raw_dim)};
  const auto half = static_cast<std::ptrdiff_t>(length / 2);
  for (std::size_t r = 0; r < length; ++r) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(center) + static_cast<std::ptrdiff_t>(r) - half;
    const auto clamped = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(src, 0, static_cast<std::ptrdiff_t>(frames) - 1));
    std::copy_n(sequence.begin() + static_cast<std::ptrdiff_t>(clamped * raw_dim), raw_dim,
                w.rows.begin() + static_cast<std::ptrdiff_t>(r * raw_dim));
  }
  return w;
}

Tensor unfold_time3(const Tensor& x) {
  const std::size_t n = x.rows(), c = x.cols();
  std::vector<double> out(n * 3 * c, 0.0);
  auto xv = x.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = -1; k <= 1; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(i) + k;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
      std::copy_n(xv.begin() + src * static_cast<std::ptrdiff_t>(c), c,
                  out.begin() + static_cast<std::ptrdiff_t>(i * 3 * c + static_cast<std::size_t>(k + 1) * c));
    }
  }
  return num::make_op("unfold_time3", {n, 3 * c}, std::move(out), {&x}, [x, n, c](const num::Node& o) {
    auto gx = num::grad_sink(x);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = -1; k <= 1; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(i) + k;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
        const double* g = o.grad.data() + i * 3 * c + static_cast<std::size_t>(k + 1) * c;
        for (std::size_t j = 0; j < c; ++j) gx[static_cast<std::size_t>(src) * c + j] += g[j];
      }
    }
  });
}

AudioEncoder::AudioEncoder(const AudioEncoderConfig& config) : config_(config) {
  const auto d = config.feature_dim;
  conv1_w_ = Tensor::zeros({3 * config.raw_dim, config.conv_dim}, true);
  conv1_b_ = Tensor::zeros({config.conv_dim}, true);
  conv2_w_ = Tensor::zeros({3 * config.conv_dim, d}, true);
  conv2_b_ = Tensor::zeros({d}, true);
  query_w_ = Tensor::zeros({d, d}, true);
  key_w_ = Tensor::zeros({d, d}, true);
  value_w_ = Tensor::zeros({d, d}, true);
  pool_w_ = Tensor::zeros({d, 1}, true);
  pool_position_ = Tensor::zeros({1, config.window}, true);
  out_w_ = Tensor::zeros({d, d}, true);
  out_b_ = Tensor::zeros({d}, true);
}

void AudioEncoder::init_random(num::Rng& rng) {
  num::init_uniform(conv1_w_, rng, 1.0);
  num::init_uniform(conv2_w_, rng, 1.0);
  num::init_uniform(query_w_, rng, 0.5);
  num::init_uniform(key_w_, rng, 0.5);
  num::init_uniform(value_w_, rng, 0.7);
  num::init_uniform(pool_w_, rng, 0.1);
  num::init_uniform(out_w_, rng, 0.7);
  // Pooling starts focused on the centre frame.
  auto pos = pool_position_.mutable_values();
  const double c = static_cast<double>(config_.window / 2);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double z = (static_cast<double>(i) - c) / 1.5;
    pos[i] = -0.5 * z * z;
  }
}

Tensor AudioEncoder::encode(const AudioWindow& window) const {
  if (window.raw_dim != config_.raw_dim) {
    throw ShapeError("encode_audio: window raw dimension " + std::to_string(window.raw_dim) + ", encoder expects " +
                     std::to_string(config_.raw_dim));
  }
  if (window.length != config_.window || window.rows.size() != window.length * window.raw_dim) {
    throw ShapeError("encode_audio: window length " + std::to_string(window.length) + ", encoder expects " +
                     std::to_string(config_.window));
  }
  using namespace num;
  const Tensor x = Tensor::from({window.length, window.raw_dim}, window.rows);
  const Tensor h1 = relu(linear(unfold_time3(x), conv1_w_, conv1_b_));
  const Tensor h2 = relu(linear(unfold_time3(h1), conv2_w_, conv2_b_));
  const Tensor q = matmul(h2, query_w_);
  const Tensor k = matmul(h2, key_w_);
  const Tensor v = matmul(h2, value_w_);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(config_.feature_dim));
  const Tensor attn = softmax_rows(scale(matmul_nt(q, k), inv_sqrt_d));
  const Tensor y = matmul(attn, v);
  const Tensor logits = add(reshape(matmul(y, pool_w_), {1, window.length}), pool_position_);
  const Tensor pooled = matmul(softmax_rows(logits), y);
  return linear(pooled, out_w_, out_b_);
}

void AudioEncoder::collect(const std::string& prefix, num::ParameterList& out) const {
  out.push_back({prefix + ".conv1.weight", conv1_w_});
  out.push_back({prefix + ".conv1.bias", conv1_b_});
  out.push_back({prefix + ".conv2.weight", conv2_w_});
  out.push_back({prefix + ".conv2.bias", conv2_b_});
  out.push_back({prefix + ".attn.query", query_w_});
  out.push_back({prefix + ".attn.key", key_w_});
  out.push_back({prefix + ".attn.value", value_w_});
  out.push_back({prefix + ".pool.weight", pool_w_});
  out.push_back({prefix + ".pool.position", pool_position_});
  out.push_back({prefix + ".out.weight", out_w_});
  out.push_back({prefix + ".out.bias", out_b_});
}

Tensor encode_audio(const AudioWindow& window, const AudioEncoder& params) { return params.encode(window); }

}  // namespace pnerf::enc
