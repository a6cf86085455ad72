#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnerf/encoders/audio_encoder.hpp"
#include "pnerf/fields/pose.hpp"
#include "pnerf/renderer/camera.hpp"

namespace pnerf {

// A dataset file violates the layout (missing file, bad shape, class id out
// of range, invalid pose, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pnerf

namespace pnerf::io {

using fields::Pose;
using fields::Vec3;

struct DatasetMeta {
  std::size_t frames = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::string> class_names;  // K = size
  render::Intrinsics intrinsics;
  double near = 0.0;
  double far = 0.0;
  render::SceneBox box;
  std::size_t audio_dim = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
  nlohmann::json extra;  // free-form (e.g. generator settings)

  std::size_t classes() const { return class_names.size(); }
  // Normalized frame time t = i / (T - 1) (0 for a single frame).
  double time(std::size_t frame) const;
};

nlohmann::json to_json(const DatasetMeta& meta);
// Throws ValidationError on missing or inconsistent fields.
DatasetMeta meta_from_json(const nlohmann::json& j);

struct FrameRecord {
  std::size_t index = 0;
  double time = 0.0;
  std::vector<double> rgb;            // [H * W * 3] in [0, 1]
  std::vector<std::uint8_t> labels;   // [H * W]
  Pose pose;
};

// A validated dataset directory. Small per-dataset arrays are held in memory;
// frames are decoded on demand.
class Dataset {
 public:
  static Dataset load(const std::filesystem::path& dir);

  const DatasetMeta& meta() const { return meta_; }
  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<Pose>& poses() const { return poses_; }
  const std::vector<double>& audio() const { return audio_; }  // [T, D_raw]
  const std::vector<Vec3>& anchors() const { return anchors_; }
  const std::vector<double>& background() const { return background_; }  // [H * W * 3]

  FrameRecord frame(std::size_t index) const;
  enc::AudioWindow audio_window(std::size_t index, std::size_t length) const;

 private:
  std::filesystem::path dir_;
  DatasetMeta meta_;
  std::vector<Pose> poses_;
  std::vector<double> audio_;
  std::vector<Vec3> anchors_;
  std::vector<double> background_;
};

Dataset load_dataset(const std::filesystem::path& dir);

// Deterministic train / holdout split of T frames. Frame 0 always trains.
// round(ratio * T) frames train (at least 1, at most T - 1). Throws
// ContractError for T < 2 or ratio outside (0, 1).
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};
Split split(std::size_t frames, double ratio, std::uint64_t seed);
Split split(const DatasetMeta& meta, double ratio, std::uint64_t seed);

// Writers used by the generator and tests.
void write_meta(const std::filesystem::path& dir, const DatasetMeta& meta);
void write_poses(const std::filesystem::path& path, const std::vector<Pose>& poses);
void write_audio(const std::filesystem::path& dir, const std::vector<double>& rows, std::size_t frames,
                 std::size_t dim);
void write_anchors(const std::filesystem::path& path, const std::vector<Vec3>& anchors);
std::filesystem::path frame_path(const std::filesystem::path& dir, std::size_t index);
std::filesystem::path semantic_path(const std::filesystem::path& dir, std::size_t index);

}  // namespace pnerf::io
