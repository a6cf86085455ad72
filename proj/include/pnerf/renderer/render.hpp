#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pnerf/fields/portrait_model.hpp"
#include "pnerf/renderer/camera.hpp"
#include "pnerf/renderer/composite.hpp"

namespace pnerf::render {

struct RenderConfig {
  std::size_t n_coarse = 32;
  std::size_t n_fine = 32;
  double near = 1.8;
  double far = 4.2;
  Intrinsics intrinsics;
  SceneBox box;
  std::size_t background_class = 0;
  double weight_epsilon = 1e-5;
  std::size_t chunk = 1024;  // rays per batch in render_frame
};

// Rays of one frame. With `streams` empty, sampling is deterministic
// (stratum midpoints, evenly spaced fine quantiles); otherwise streams[i]
// seeds the sampler of ray i.
struct RayBatch {
  std::vector<Ray> rays;
  std::vector<double> background;  // [R * 3]
  std::vector<std::uint64_t> streams;
};

struct RenderOutput {
  Composite coarse;
  Composite fine;
  std::vector<double> coarse_depths;  // [R * n_coarse]
  std::vector<double> fine_depths;    // [R * (n_coarse + n_fine)], merged and sorted
  // Per ray, sum_i w_i |dx_i| over the fine pass in normalized units; zero
  // without a deformation field.
  std::vector<double> deform_magnitude;
};

// Coarse pass on stratified samples, then the fine network on the merged
// coarse + importance samples. Sample points are warped by the deformation
// field before every field evaluation; warps and latent features of coarse
// samples are reused by the fine pass.
RenderOutput render_rays(const fields::PortraitModel& model, const fields::FrameConditioning& frame,
                         const RayBatch& batch, const RenderConfig& config);

struct FrameImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t classes = 0;
  std::vector<double> rgb;       // [H * W * 3], fine pass
  std::vector<double> semantic;  // [H * W * K], fine pass
  std::vector<double> deform;    // [H * W]
  std::vector<double> t_final;   // [H * W]
};

// Renders every pixel centre of a frame with deterministic sampling, in
// fixed chunks of config.chunk rays. `threads` > 1 spreads chunks over worker
// threads; the result is bit-identical to the serial render.
FrameImage render_frame(const fields::PortraitModel& model, const fields::FrameConditioning& frame,
                        const Pose& pose, double time, const std::vector<double>& background,
                        const RenderConfig& config, std::size_t threads = 1);

}  // namespace pnerf::render
