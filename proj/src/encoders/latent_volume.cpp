#include "pnerf/encoders/latent_volume.hpp"

#include <algorithm>
#include <cmath>

#include "pnerf/numerics/ops.hpp"

namespace pnerf::enc {

using num::Tensor;

LatentVolume::LatentVolume(const LatentVolumeConfig& config, std::vector<Vec3> anchors)
    : config_(config), anchors_(std::move(anchors)) {
  if (anchors_.empty()) throw ContractError("LatentVolume: at least one anchor is required");
  if (config.resolutions.empty()) throw ContractError("LatentVolume: no grid resolutions");
  const double sigma_cells = config.kernel_std_cells;
  auto table = std::make_shared<SplatTable>();
  std::int32_t next_slot = 0;
  for (std::size_t res : config.resolutions) {
    if (res < 2) throw ContractError("LatentVolume: grid resolution must be at least 2");
    Level level;
    level.res = res;
    level.cell = 2.0 / static_cast<double>(res - 1);
    level.slot.assign(res * res * res, -1);
    const double radius = config.support_cells * level.cell;
    const double sigma = sigma_cells * level.cell;
    // Gather (anchor, kernel) contributions per node, in node order.
    std::vector<std::vector<std::pair<std::uint32_t, double>>> contrib(res * res * res);
    for (std::uint32_t a = 0; a < anchors_.size(); ++a) {
      const auto& p = anchors_[a];
      std::array<std::ptrdiff_t, 3> lo{}, hi{};
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil((p[d] - radius + 1.0) / level.cell)));
        hi[d] = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(res) - 1,
                                         static_cast<std::ptrdiff_t>(std::floor((p[d] + radius + 1.0) / level.cell)));
      }
      for (auto i = lo[0]; i <= hi[0]; ++i)
        for (auto j = lo[1]; j <= hi[1]; ++j)
          for (auto k = lo[2]; k <= hi[2]; ++k) {
            const double dx = -1.0 + static_cast<double>(i) * level.cell - p[0];
            const double dy = -1.0 + static_cast<double>(j) * level.cell - p[1];
            const double dz = -1.0 + static_cast<double>(k) * level.cell - p[2];
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 > radius * radius) continue;
            const auto node = (static_cast<std::size_t>(i) * res + static_cast<std::size_t>(j)) * res +
                              static_cast<std::size_t>(k);
            contrib[node].emplace_back(a, std::exp(-0.5 * d2 / (sigma * sigma)));
          }
    }
    for (std::size_t node = 0; node < contrib.size(); ++node) {
      if (contrib[node].empty()) continue;
      double total = 0.0;
      for (const auto& [a, w] : contrib[node]) total += w;
      for (const auto& [a, w] : contrib[node]) {
        table->anchor.push_back(a);
        table->weight.push_back(w / total);
      }
      table->offsets.push_back(table->anchor.size());
      level.slot[node] = next_slot++;
    }
    levels_.push_back(std::move(level));
  }
  splat_ = std::move(table);
  const auto d = config.code_dim;
  codes_ = Tensor::zeros({anchors_.size(), d}, true);
  std::vector<double> eye(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) eye[i * d + i] = 1.0;
  projection_ = Tensor::from({d, d}, std::move(eye), true);
}

void LatentVolume::init_random(num::Rng& rng, double code_std) {
  for (auto& c : codes_.mutable_values()) c = rng.normal(0.0, code_std);
}

double LatentVolume::truncation_radius() const {
  double r = 0.0;
  for (const auto& l : levels_) r = std::max(r, (config_.support_cells + std::sqrt(3.0)) * l.cell);
  return r;
}

LatentGrid LatentVolume::prepare() const {
  const std::size_t m = active_nodes(), d = config_.code_dim;
  std::vector<double> nodes(m * d, 0.0);
  auto cv = codes_.values();
  const auto& table = *splat_;
  for (std::size_t j = 0; j < m; ++j) {
    double* out = nodes.data() + j * d;
    for (std::size_t k = table.offsets[j]; k < table.offsets[j + 1]; ++k) {
      const double w = table.weight[k];
      const double* code = cv.data() + table.anchor[k] * d;
      for (std::size_t c = 0; c < d; ++c) out[c] += w * code[c];
    }
  }
  const Tensor codes = codes_;
  Tensor splatted = num::make_op("latent_splat", {m, d}, std::move(nodes), {&codes_},
                                 [splat = splat_, codes, m, d](const num::Node& o) {
                                   auto gc = num::grad_sink(codes);
                                   if (gc.empty()) return;
                                   for (std::size_t j = 0; j < m; ++j) {
                                     const double* g = o.grad.data() + j * d;
                                     for (std::size_t k = splat->offsets[j]; k < splat->offsets[j + 1]; ++k) {
                                       const double w = splat->weight[k];
                                       double* dst = gc.data() + splat->anchor[k] * d;
                                       for (std::size_t c = 0; c < d; ++c) dst[c] += w * g[c];
                                     }
                                   }
                                 });
  return LatentGrid{num::matmul(splatted, projection_)};
}

namespace {

struct Corner {
  std::int32_t slot;
  double weight;
  std::array<double, 3> dweight;  // d weight / d point
};

}  // namespace

Tensor LatentVolume::query(const LatentGrid& grid, const Tensor& points) const {
  if (points.cols() != 3) throw ShapeError("query_latent: points must be [n, 3]");
  const std::size_t n = points.rows(), d = config_.code_dim;
  if (grid.node_features.rows() != active_nodes() || grid.node_features.cols() != d) {
    throw ShapeError("query_latent: grid does not belong to this volume");
  }
  const std::size_t per_point = levels_.size() * 8;
  std::vector<Corner> corners(n * per_point);
  auto pv = points.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      const auto& lev = levels_[l];
      std::array<std::ptrdiff_t, 3> base{};
      std::array<double, 3> frac{};
      for (int a = 0; a < 3; ++a) {
        const double u = (pv[i * 3 + a] + 1.0) / lev.cell;
        const double f = std::floor(u);
        base[a] = static_cast<std::ptrdiff_t>(f);
        frac[a] = u - f;
      }
      for (int c = 0; c < 8; ++c) {
        Corner& cr = corners[i * per_point + l * 8 + static_cast<std::size_t>(c)];
        std::array<double, 3> w1{}, dw1{};
        bool inside = true;
        std::size_t flat = 0;
        for (int a = 0; a < 3; ++a) {
          const int bit = (c >> (2 - a)) & 1;
          const auto idx = base[a] + bit;
          inside = inside && idx >= 0 && idx < static_cast<std::ptrdiff_t>(lev.res);
          flat = flat * lev.res + static_cast<std::size_t>(std::max<std::ptrdiff_t>(idx, 0));
          w1[a] = bit ? frac[a] : 1.0 - frac[a];
          dw1[a] = (bit ? 1.0 : -1.0) / lev.cell;
        }
        cr.slot = inside ? lev.slot[flat] : -1;
        cr.weight = w1[0] * w1[1] * w1[2];
        cr.dweight = {dw1[0] * w1[1] * w1[2], w1[0] * dw1[1] * w1[2], w1[0] * w1[1] * dw1[2]};
      }
    }
  }
  std::vector<double> out(n * d, 0.0);
  auto fv = grid.node_features.values();
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = out.data() + i * d;
    for (std::size_t k = 0; k < per_point; ++k) {
      const Corner& cr = corners[i * per_point + k];
      if (cr.slot < 0 || cr.weight == 0.0) continue;
      const double* src = fv.data() + static_cast<std::size_t>(cr.slot) * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += cr.weight * src[c];
    }
  }
  const Tensor features = grid.node_features;
  return num::make_op("latent_query", {n, d}, std::move(out), {&features, &points},
                      [features, points, corners = std::move(corners), n, d, per_point](const num::Node& o) {
                        auto gf = num::grad_sink(features);
                        auto gp = num::grad_sink(points);
                        auto fv = features.values();
                        for (std::size_t i = 0; i < n; ++i) {
                          const double* g = o.grad.data() + i * d;
                          for (std::size_t k = 0; k < per_point; ++k) {
                            const Corner& cr = corners[i * per_point + k];
                            if (cr.slot < 0) continue;
                            const auto off = static_cast<std::size_t>(cr.slot) * d;
                            if (!gf.empty())
                              for (std::size_t c = 0; c < d; ++c) gf[off + c] += cr.weight * g[c];
                            if (!gp.empty()) {
                              double dot = 0.0;
                              for (std::size_t c = 0; c < d; ++c) dot += g[c] * fv[off + c];
                              for (int a = 0; a < 3; ++a) gp[i * 3 + static_cast<std::size_t>(a)] += cr.dweight[a] * dot;
                            }
                          }
                        }
                      });
}

void LatentVolume::collect(const std::string& prefix, num::ParameterList& out) const {
  out.push_back({prefix + ".codes", codes_});
  out.push_back({prefix + ".projection", projection_});
}

Tensor query_latent(const LatentVolume& volume, const Tensor& points) { return volume.query(points); }

}  // namespace pnerf::enc
