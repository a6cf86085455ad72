#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pnerf/dataio/dataset.hpp"

namespace pnerf::io {

// Analytic "portrait": a flat-shaded head sphere with an audio-driven mouth
// patch, and a torso box below it that slides sideways over time. The head
// is static in world (head-canonical) space and the camera orbits it, so the
// camera pose doubles as the head pose. Classes: 0 background, 1 head,
// 2 mouth, 3 torso.
struct SynthSceneConfig {
  std::size_t frames = 50;
  std::size_t width = 64;
  std::size_t height = 64;
  double focal = 80.0;

  Vec3 head_center{0.0, 0.25, 0.0};
  double head_radius = 0.5;
  Vec3 head_color{0.90, 0.72, 0.58};

  // The patch is the spherical cap around `mouth_direction` with angular
  // radius mouth_min + mouth_gain * amplitude.
  Vec3 mouth_direction{0.0, -0.35, 1.0};
  double mouth_min = 0.12;
  double mouth_gain = 0.23;
  Vec3 mouth_color{0.55, 0.08, 0.14};

  // Axis-aligned box at rest; shifted along x by amplitude * sin(2 pi f t).
  Vec3 torso_min{-0.6, -1.15, -0.3};
  Vec3 torso_max{0.6, -0.3, 0.3};
  double torso_shift_amplitude = 0.15;
  double torso_shift_frequency = 0.8;  // cycles over the normalized clip
  Vec3 torso_front_color{0.20, 0.36, 0.72};
  Vec3 torso_side_color{0.14, 0.26, 0.52};
  Vec3 torso_top_color{0.32, 0.48, 0.82};

  Vec3 background_color{0.88, 0.92, 0.97};

  // Camera orbit around `look_at` at `distance`: yaw = yaw_amplitude *
  // sin(2 pi t), pitch = pitch_amplitude * sin(2 pi t * 1.5 + 0.7).
  Vec3 look_at{0.0, -0.15, 0.0};
  double distance = 3.0;
  double yaw_amplitude = 0.35;
  double pitch_amplitude = 0.08;
  double near = 1.7;
  double far = 4.3;
  Vec3 box_center{0.0, -0.15, 0.0};
  double box_half_extent = 1.3;

  std::size_t audio_dim = 29;
  std::size_t anchors = 256;
  double train_ratio = 0.8;
  std::uint64_t seed = 0;
};

// 16x16 scene whose training split is the single frame 0; used for smoke runs.
SynthSceneConfig smoke_scene_config();

nlohmann::json to_json(const SynthSceneConfig& config);
SynthSceneConfig synth_config_from_json(const nlohmann::json& j);

// Per-frame ground truth of the generator, exposed for tests and evaluation.
double synth_time(const SynthSceneConfig& c, std::size_t frame);
double audio_amplitude(const SynthSceneConfig& c, std::size_t frame);
double torso_shift(const SynthSceneConfig& c, double t);
Pose camera_pose(const SynthSceneConfig& c, double t);
std::vector<double> audio_row(const SynthSceneConfig& c, double amplitude);
// Frame with the largest |torso shift|.
std::size_t max_shift_frame(const SynthSceneConfig& c);

struct SynthHit {
  std::uint8_t label = 0;
  Vec3 color{};
  double depth = 0.0;  // along the ray; 0 for background
};
// Nearest surface along a ray of frame `frame`.
SynthHit trace(const SynthSceneConfig& c, std::size_t frame, const render::Ray& ray);

// Writes a complete dataset. Throws IoError when the directory cannot be
// written.
void generate_synthetic(const SynthSceneConfig& config, const std::filesystem::path& out_dir);

}  // namespace pnerf::io
