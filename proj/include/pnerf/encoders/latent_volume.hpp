#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "pnerf/numerics/mlp.hpp"
#include "pnerf/numerics/rng.hpp"

namespace pnerf::enc {

using Vec3 = std::array<double, 3>;

struct LatentVolumeConfig {
  // Nodes per axis of each dense grid spanning [-1, 1]^3.
  std::vector<std::size_t> resolutions{32, 16, 8, 4};
  double kernel_std_cells = 1.0;  // Gaussian std, in cells of the level
  double support_cells = 2.0;     // kernel truncation, in cells of the level
  std::size_t code_dim = 88;
};

// Node features after splatting and projection; valid until the codes or
// projection change.
struct LatentGrid {
  num::Tensor node_features;  // [active nodes, code_dim]
};

// Trainable codes anchored at fixed points. Each grid node within a level's
// support radius of some anchor holds the Gaussian-weighted average of the
// nearby codes; a query trilinearly interpolates every level, sums the levels
// and applies a learned linear projection (applied per node, which commutes
// with interpolation).
class LatentVolume {
 public:
  LatentVolume() = default;
  // Codes start at zero and the projection at identity.
  LatentVolume(const LatentVolumeConfig& config, std::vector<Vec3> anchors);

  void init_random(num::Rng& rng, double code_std = 0.1);

  LatentGrid prepare() const;
  // points [n, 3] in normalized head-canonical coordinates -> [n, code_dim].
  // Differentiable with respect to codes, projection and points.
  num::Tensor query(const LatentGrid& grid, const num::Tensor& points) const;
  num::Tensor query(const num::Tensor& points) const { return query(prepare(), points); }

  // A point farther than this from every anchor maps to the zero feature.
  double truncation_radius() const;

  void collect(const std::string& prefix, num::ParameterList& out) const;

  const LatentVolumeConfig& config() const { return config_; }
  const std::vector<Vec3>& anchors() const { return anchors_; }
  std::size_t active_nodes() const { return splat_ ? splat_->offsets.size() - 1 : 0; }
  num::Tensor& codes() { return codes_; }
  num::Tensor& projection() { return projection_; }

 private:
  struct Level {
    std::size_t res = 0;
    double cell = 0.0;
    std::vector<std::int32_t> slot;  // res^3 -> active node index or -1
  };

  LatentVolumeConfig config_;
  std::vector<Vec3> anchors_;
  std::vector<Level> levels_;
  // CSR: active node j draws from anchors anchor[k] with weight weight[k],
  // k in [offsets[j], offsets[j+1]).
  struct SplatTable {
    std::vector<std::size_t> offsets{0};
    std::vector<std::uint32_t> anchor;
    std::vector<double> weight;
  };
  std::shared_ptr<const SplatTable> splat_;

  num::Tensor codes_;       // [anchors, code_dim]
  num::Tensor projection_;  // [code_dim, code_dim]
};

num::Tensor query_latent(const LatentVolume& volume, const num::Tensor& points);

}  // namespace pnerf::enc
