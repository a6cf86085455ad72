#include "pnerf/renderer/render.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "pnerf/encoders/positional.hpp"
#include "pnerf/numerics/ops.hpp"
#include "pnerf/renderer/sampling.hpp"

namespace pnerf::render {

using fields::Pass;
using num::Tensor;

namespace {

Tensor sample_points(const std::vector<Ray>& rays, const std::vector<double>& depths, std::size_t n,
                     const SceneBox& box) {
  std::vector<double> p(depths.size() * 3);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t i = r * n + j;
      const Vec3 x = box.normalize(rays[r].at(depths[i]));
      p[i * 3] = x[0];
      p[i * 3 + 1] = x[1];
      p[i * 3 + 2] = x[2];
    }
  }
  return Tensor::from({depths.size(), 3}, std::move(p));
}

std::vector<std::size_t> ray_index(std::size_t rays, std::size_t n) {
  std::vector<std::size_t> idx(rays * n);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i / n;
  return idx;
}

}  // namespace

RenderOutput render_rays(const fields::PortraitModel& model, const fields::FrameConditioning& frame,
                         const RayBatch& batch, const RenderConfig& config) {
  const std::size_t rays = batch.rays.size();
  const std::size_t nc = config.n_coarse, nf = config.n_fine, nm = nc + nf;
  if (nc < 2) throw ContractError("render: need at least two coarse samples");
  if (rays == 0) throw ContractError("render: empty ray batch");
  if (batch.background.size() != rays * 3) throw ShapeError("render: background must hold 3 values per ray");
  if (!batch.streams.empty() && batch.streams.size() != rays) throw ShapeError("render: one stream per ray");

  std::vector<std::optional<num::Rng>> rngs(rays);
  if (!batch.streams.empty())
    for (std::size_t r = 0; r < rays; ++r) rngs[r].emplace(batch.streams[r]);
  auto rng_of = [&](std::size_t r) { return rngs[r] ? &*rngs[r] : nullptr; };

  RenderOutput out;
  out.coarse_depths.resize(rays * nc);
  std::vector<double> coarse_deltas(rays * nc);
  std::vector<double> dirs(rays * 3);
  for (std::size_t r = 0; r < rays; ++r) {
    const auto v = sample_coarse(batch.rays[r], nc, rng_of(r));
    const auto d = interval_lengths(v, batch.rays[r].far);
    std::copy(v.begin(), v.end(), out.coarse_depths.begin() + static_cast<std::ptrdiff_t>(r * nc));
    std::copy(d.begin(), d.end(), coarse_deltas.begin() + static_cast<std::ptrdiff_t>(r * nc));
    for (std::size_t c = 0; c < 3; ++c) dirs[r * 3 + c] = batch.rays[r].direction[c];
  }
  const Tensor dir_enc =
      enc::positional_encode(Tensor::from({rays, 3}, std::move(dirs)), model.config().semantic.levels_d, true);

  // Coarse pass.
  const auto coarse_points = sample_points(batch.rays, out.coarse_depths, nc, config.box);
  const auto coarse_warp = model.warp(coarse_points, frame);
  const auto coarse_rays = ray_index(rays, nc);
  const auto co = model.evaluate(Pass::kCoarse, coarse_warp, dir_enc, coarse_rays, frame);
  out.coarse = composite(co.sigma, co.color, co.logits, coarse_deltas, nc, batch.background, config.background_class);

  // Importance samples from the coarse weights.
  std::vector<double> new_depths(rays * nf);
  std::vector<std::size_t> gather(rays * nm);
  std::vector<double> fine_deltas(rays * nm);
  out.fine_depths.resize(rays * nm);
  for (std::size_t r = 0; r < rays; ++r) {
    const std::span<const double> cv(out.coarse_depths.data() + r * nc, nc);
    const std::span<const double> cw(out.coarse.weights.data() + r * nc, nc);
    const auto f = sample_fine(cv, batch.rays[r].far, cw, nf, rng_of(r), config.weight_epsilon);
    std::copy(f.begin(), f.end(), new_depths.begin() + static_cast<std::ptrdiff_t>(r * nf));
    const auto merged = merge_depths(cv, f);
    const auto d = interval_lengths(merged.depth, batch.rays[r].far);
    for (std::size_t j = 0; j < nm; ++j) {
      const std::size_t src = merged.source[j];
      gather[r * nm + j] = src < nc ? r * nc + src : rays * nc + r * nf + (src - nc);
      out.fine_depths[r * nm + j] = merged.depth[j];
      fine_deltas[r * nm + j] = d[j];
    }
  }

  // Fine pass: warp only the new samples, reuse the coarse ones.
  fields::WarpedSamples fine_in;
  std::vector<double> dx_all;
  if (nf > 0) {
    const auto fine_points = sample_points(batch.rays, new_depths, nf, config.box);
    const auto fine_warp = model.warp(fine_points, frame);
    fine_in.x_enc = num::gather_rows(num::concat_rows({coarse_warp.x_enc, fine_warp.x_enc}), gather);
    if (coarse_warp.latent.defined())
      fine_in.latent = num::gather_rows(num::concat_rows({coarse_warp.latent, fine_warp.latent}), gather);
    if (coarse_warp.displacement.defined()) {
      const auto a = coarse_warp.displacement.values(), b = fine_warp.displacement.values();
      dx_all.assign(a.begin(), a.end());
      dx_all.insert(dx_all.end(), b.begin(), b.end());
    }
  } else {
    fine_in.x_enc = num::gather_rows(coarse_warp.x_enc, gather);
    if (coarse_warp.latent.defined()) fine_in.latent = num::gather_rows(coarse_warp.latent, gather);
    if (coarse_warp.displacement.defined()) {
      const auto a = coarse_warp.displacement.values();
      dx_all.assign(a.begin(), a.end());
    }
  }
  const auto fo = model.evaluate(Pass::kFine, fine_in, dir_enc, ray_index(rays, nm), frame);
  out.fine = composite(fo.sigma, fo.color, fo.logits, fine_deltas, nm, batch.background, config.background_class);

  out.deform_magnitude.assign(rays, 0.0);
  if (!dx_all.empty()) {
    for (std::size_t r = 0; r < rays; ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < nm; ++j) {
        const std::size_t s = gather[r * nm + j];
        const double m = std::sqrt(dx_all[s * 3] * dx_all[s * 3] + dx_all[s * 3 + 1] * dx_all[s * 3 + 1] +
                                   dx_all[s * 3 + 2] * dx_all[s * 3 + 2]);
        acc += out.fine.weights[r * nm + j] * m;
      }
      out.deform_magnitude[r] = acc;
    }
  }
  return out;
}

FrameImage render_frame(const fields::PortraitModel& model, const fields::FrameConditioning& frame,
                        const Pose& pose, double time, const std::vector<double>& background,
                        const RenderConfig& config, std::size_t threads) {
  const auto& k = config.intrinsics;
  const std::size_t pixels = k.width * k.height;
  if (background.size() != pixels * 3) throw ShapeError("render_frame: background must be H x W x 3");
  const std::size_t classes = model.config().semantic.classes;
  FrameImage img;
  img.width = k.width;
  img.height = k.height;
  img.classes = classes;
  img.rgb.resize(pixels * 3);
  img.semantic.resize(pixels * classes);
  img.deform.resize(pixels);
  img.t_final.resize(pixels);

  const std::size_t chunk = std::max<std::size_t>(config.chunk, 1);
  const std::size_t chunks = (pixels + chunk - 1) / chunk;
  auto render_chunk = [&](std::size_t c) {
    num::Tape::Pause no_grad;
    const std::size_t begin = c * chunk, end = std::min(pixels, begin + chunk);
    RayBatch batch;
    for (std::size_t p = begin; p < end; ++p) {
      const double u = static_cast<double>(p % k.width) + 0.5, v = static_cast<double>(p / k.width) + 0.5;
      batch.rays.push_back(generate_ray(pose, k, u, v, time, config.near, config.far));
      batch.background.insert(batch.background.end(), background.begin() + static_cast<std::ptrdiff_t>(p * 3),
                              background.begin() + static_cast<std::ptrdiff_t>(p * 3 + 3));
    }
    const auto out = render_rays(model, frame, batch, config);
    const auto rgb = out.fine.rgb.values(), sem = out.fine.semantic.values();
    std::copy(rgb.begin(), rgb.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(begin * 3));
    std::copy(sem.begin(), sem.end(), img.semantic.begin() + static_cast<std::ptrdiff_t>(begin * classes));
    std::copy(out.deform_magnitude.begin(), out.deform_magnitude.end(),
              img.deform.begin() + static_cast<std::ptrdiff_t>(begin));
    std::copy(out.fine.t_final.begin(), out.fine.t_final.end(), img.t_final.begin() + static_cast<std::ptrdiff_t>(begin));
  };

  if (threads <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) render_chunk(c);
    return img;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, chunks); ++t) {
    pool.emplace_back([&] {
      for (std::size_t c; (c = next.fetch_add(1)) < chunks;) {
        try {
          render_chunk(c);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return img;
}

}  // namespace pnerf::render
