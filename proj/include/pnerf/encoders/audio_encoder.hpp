#pragma once

#include <cstddef>
#include <vector>

#include "pnerf/numerics/mlp.hpp"
#include "pnerf/numerics/rng.hpp"

namespace pnerf::enc {

// Raw feature rows for a contiguous span of frames centred on one frame.
// Rows past either end of the sequence repeat the first / last frame.
struct AudioWindow {
  std::size_t length = 0;   // W
  std::size_t raw_dim = 0;  // D_raw
  std::size_t center = 0;   // frame index the window is centred on
  std::vector<double> rows; // [W, D_raw], row-major
};

// Builds the window for `center` from a [frames, raw_dim] sequence, clamping
// at both ends. The centre frame sits at row W / 2.
AudioWindow make_audio_window(const std::vector<double>& sequence, std::size_t frames, std::size_t raw_dim,
                              std::size_t center, std::size_t length);

struct AudioEncoderConfig {
  std::size_t raw_dim = 29;
  std::size_t window = 16;
  std::size_t conv_dim = 32;
  std::size_t feature_dim = 64;
};

// Two width-3 temporal convolutions (D_raw -> 32 -> 64, rectified), one head
// of scaled dot-product self-attention over the window, then attention
// pooling to a single vector and a final linear layer. The pooling logits
// carry a learned per-position bias so the encoder can tell the centre frame
// apart from its neighbours.
class AudioEncoder {
 public:
  AudioEncoder() = default;
  explicit AudioEncoder(const AudioEncoderConfig& config);  // zero parameters

  void init_random(num::Rng& rng);

  // Returns a [1, feature_dim] feature.
  num::Tensor encode(const AudioWindow& window) const;

  void collect(const std::string& prefix, num::ParameterList& out) const;
  const AudioEncoderConfig& config() const { return config_; }
  num::Tensor& output_bias() { return out_b_; }

 private:
  AudioEncoderConfig config_;
  num::Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  num::Tensor query_w_, key_w_, value_w_;
  num::Tensor pool_w_, pool_position_;
  num::Tensor out_w_, out_b_;
};

num::Tensor encode_audio(const AudioWindow& window, const AudioEncoder& params);

// [W, C] -> [W, 3C]: row i holds rows (i-1, i, i+1), zero beyond the window.
num::Tensor unfold_time3(const num::Tensor& x);

}  // namespace pnerf::enc
