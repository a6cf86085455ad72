#include "pnerf/dataio/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pnerf/dataio/png.hpp"
#include "pnerf/numerics/checkpoint.hpp"
#include "pnerf/numerics/rng.hpp"

namespace pnerf::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(dot(v, v));
  return {v[0] / n, v[1] / n, v[2] / n};
}

// Nearest positive intersection of a ray with a sphere, or +inf.
double hit_sphere(const render::Ray& r, const Vec3& c, double radius) {
  const Vec3 oc = sub(r.origin, c);
  const double b = dot(oc, r.direction);
  const double disc = b * b - (dot(oc, oc) - radius * radius);
  if (disc < 0) return std::numeric_limits<double>::infinity();
  const double s = std::sqrt(disc);
  if (const double t0 = -b - s; t0 > 0) return t0;
  if (const double t1 = -b + s; t1 > 0) return t1;
  return std::numeric_limits<double>::infinity();
}

// Slab test; returns entry distance and the axis of the entry face.
double hit_box(const render::Ray& r, const Vec3& lo, const Vec3& hi, int& axis) {
  double t_near = -std::numeric_limits<double>::infinity(), t_far = std::numeric_limits<double>::infinity();
  axis = -1;
  for (int i = 0; i < 3; ++i) {
    if (r.direction[i] == 0.0) {
      if (r.origin[i] < lo[i] || r.origin[i] > hi[i]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double a = (lo[i] - r.origin[i]) / r.direction[i], b = (hi[i] - r.origin[i]) / r.direction[i];
    if (a > b) std::swap(a, b);
    if (a > t_near) {
      t_near = a;
      axis = i;
    }
    t_far = std::min(t_far, b);
  }
  if (t_near > t_far || t_near <= 0) return std::numeric_limits<double>::infinity();
  return t_near;
}

}  // namespace

SynthSceneConfig smoke_scene_config() {
  SynthSceneConfig c;
  c.frames = 2;
  c.width = 16;
  c.height = 16;
  c.focal = 20.0;
  c.anchors = 64;
  c.train_ratio = 0.5;
  return c;
}

json to_json(const SynthSceneConfig& c) {
  return {
      {"frames", c.frames},
      {"width", c.width},
      {"height", c.height},
      {"focal", c.focal},
      {"head_center", c.head_center},
      {"head_radius", c.head_radius},
      {"head_color", c.head_color},
      {"mouth_direction", c.mouth_direction},
      {"mouth_min", c.mouth_min},
      {"mouth_gain", c.mouth_gain},
      {"mouth_color", c.mouth_color},
      {"torso_min", c.torso_min},
      {"torso_max", c.torso_max},
      {"torso_shift_amplitude", c.torso_shift_amplitude},
      {"torso_shift_frequency", c.torso_shift_frequency},
      {"torso_front_color", c.torso_front_color},
      {"torso_side_color", c.torso_side_color},
      {"torso_top_color", c.torso_top_color},
      {"background_color", c.background_color},
      {"look_at", c.look_at},
      {"distance", c.distance},
      {"yaw_amplitude", c.yaw_amplitude},
      {"pitch_amplitude", c.pitch_amplitude},
      {"near", c.near},
      {"far", c.far},
      {"box_center", c.box_center},
      {"box_half_extent", c.box_half_extent},
      {"audio_dim", c.audio_dim},
      {"anchors", c.anchors},
      {"train_ratio", c.train_ratio},
      {"seed", c.seed},
  };
}

SynthSceneConfig synth_config_from_json(const json& j) {
  SynthSceneConfig c;
  auto get = [&](const char* key, auto& target) {
    if (j.contains(key)) target = j.at(key).get<std::decay_t<decltype(target)>>();
  };
  get("frames", c.frames);
  get("width", c.width);
  get("height", c.height);
  get("focal", c.focal);
  get("head_center", c.head_center);
  get("head_radius", c.head_radius);
  get("head_color", c.head_color);
  get("mouth_direction", c.mouth_direction);
  get("mouth_min", c.mouth_min);
  get("mouth_gain", c.mouth_gain);
  get("mouth_color", c.mouth_color);
  get("torso_min", c.torso_min);
  get("torso_max", c.torso_max);
  get("torso_shift_amplitude", c.torso_shift_amplitude);
  get("torso_shift_frequency", c.torso_shift_frequency);
  get("torso_front_color", c.torso_front_color);
  get("torso_side_color", c.torso_side_color);
  get("torso_top_color", c.torso_top_color);
  get("background_color", c.background_color);
  get("look_at", c.look_at);
  get("distance", c.distance);
  get("yaw_amplitude", c.yaw_amplitude);
  get("pitch_amplitude", c.pitch_amplitude);
  get("near", c.near);
  get("far", c.far);
  get("box_center", c.box_center);
  get("box_half_extent", c.box_half_extent);
  get("audio_dim", c.audio_dim);
  get("anchors", c.anchors);
  get("train_ratio", c.train_ratio);
  get("seed", c.seed);
  return c;
}

double synth_time(const SynthSceneConfig& c, std::size_t frame) {
  return c.frames > 1 ? static_cast<double>(frame) / static_cast<double>(c.frames - 1) : 0.0;
}

double audio_amplitude(const SynthSceneConfig& c, std::size_t frame) {
  // Quasi-periodic "syllables" with seed-dependent phases, unrelated to the
  // torso motion.
  num::Rng rng(num::mix_seed({c.seed, 0x617564696fULL}));
  const double p1 = rng.uniform(0, 2 * kPi), p2 = rng.uniform(0, 2 * kPi);
  const double f = static_cast<double>(frame);
  const double a = 0.5 + 0.45 * std::sin(2 * kPi * f / 6.3 + p1) + 0.25 * std::sin(2 * kPi * f / 2.7 + p2);
  return std::clamp(a, 0.0, 1.0);
}

double torso_shift(const SynthSceneConfig& c, double t) {
  return c.torso_shift_amplitude * std::sin(2 * kPi * c.torso_shift_frequency * t);
}

Pose camera_pose(const SynthSceneConfig& c, double t) {
  const double yaw = c.yaw_amplitude * std::sin(2 * kPi * t);
  const double pitch = c.pitch_amplitude * std::sin(2 * kPi * t * 1.5 + 0.7);
  const Vec3 offset{c.distance * std::sin(yaw) * std::cos(pitch), c.distance * std::sin(pitch),
                    c.distance * std::cos(yaw) * std::cos(pitch)};
  const Vec3 eye{c.look_at[0] + offset[0], c.look_at[1] + offset[1], c.look_at[2] + offset[2]};
  const Vec3 forward = normalized(sub(c.look_at, eye));
  const Vec3 right = normalized(cross(forward, {0, 1, 0}));
  const Vec3 down = cross(forward, right);
  Pose p;
  // Columns are the camera axes in world coordinates.
  p.rotation = {right[0], down[0], forward[0], right[1], down[1], forward[1], right[2], down[2], forward[2]};
  p.translation = eye;
  return p;
}

std::vector<double> audio_row(const SynthSceneConfig& c, double amplitude) {
  std::vector<double> row(c.audio_dim);
  for (std::size_t j = 0; j < c.audio_dim; ++j) {
    const double omega = kPi * (0.5 + 2.5 * static_cast<double>(j) / std::max<double>(1.0, c.audio_dim - 1.0));
    const double phase = 2 * kPi * std::fmod(0.618033988749895 * static_cast<double>(j), 1.0);
    row[j] = std::sin(omega * amplitude + phase);
  }
  return row;
}

std::size_t max_shift_frame(const SynthSceneConfig& c) {
  std::size_t best = 0;
  for (std::size_t f = 1; f < c.frames; ++f)
    if (std::abs(torso_shift(c, synth_time(c, f))) > std::abs(torso_shift(c, synth_time(c, best)))) best = f;
  return best;
}

SynthHit trace(const SynthSceneConfig& c, std::size_t frame, const render::Ray& ray) {
  SynthHit hit;
  hit.color = c.background_color;
  double best = std::numeric_limits<double>::infinity();

  const double ts = hit_sphere(ray, c.head_center, c.head_radius);
  if (ts < best) {
    best = ts;
    const Vec3 n = normalized(sub(ray.at(ts), c.head_center));
    const double theta = std::acos(std::clamp(dot(n, normalized(c.mouth_direction)), -1.0, 1.0));
    const bool mouth = theta < c.mouth_min + c.mouth_gain * audio_amplitude(c, frame);
    hit.label = mouth ? 2 : 1;
    hit.color = mouth ? c.mouth_color : c.head_color;
  }

  const double shift = torso_shift(c, synth_time(c, frame));
  const Vec3 lo{c.torso_min[0] + shift, c.torso_min[1], c.torso_min[2]};
  const Vec3 hi{c.torso_max[0] + shift, c.torso_max[1], c.torso_max[2]};
  int axis = -1;
  const double tb = hit_box(ray, lo, hi, axis);
  if (tb < best) {
    best = tb;
    hit.label = 3;
    hit.color = axis == 2 ? c.torso_front_color : axis == 1 ? c.torso_top_color : c.torso_side_color;
  }
  hit.depth = std::isfinite(best) ? best : 0.0;
  return hit;
}

void generate_synthetic(const SynthSceneConfig& c, const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out / "frames", ec);
  if (!ec) fs::create_directories(out / "semantic", ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

  DatasetMeta meta;
  meta.frames = c.frames;
  meta.width = c.width;
  meta.height = c.height;
  meta.class_names = {"background", "head", "mouth", "torso"};
  meta.intrinsics = {c.focal, c.focal, c.width / 2.0, c.height / 2.0, c.width, c.height};
  meta.near = c.near;
  meta.far = c.far;
  meta.box = {c.box_center, c.box_half_extent};
  meta.audio_dim = c.audio_dim;
  const auto s = split(c.frames, c.train_ratio, c.seed);
  meta.train = s.train;
  meta.holdout = s.holdout;
  meta.extra = {{"generator", "synthetic-portrait"}, {"config", to_json(c)}, {"max_shift_frame", max_shift_frame(c)}};
  write_meta(out, meta);

  std::vector<Pose> poses;
  std::vector<double> audio;
  for (std::size_t f = 0; f < c.frames; ++f) {
    const double t = synth_time(c, f);
    const Pose pose = camera_pose(c, t);
    poses.push_back(pose);
    const auto row = audio_row(c, audio_amplitude(c, f));
    audio.insert(audio.end(), row.begin(), row.end());

    Image8 rgb{c.width, c.height, 3, std::vector<std::uint8_t>(c.width * c.height * 3)};
    Image8 sem{c.width, c.height, 1, std::vector<std::uint8_t>(c.width * c.height)};
    for (std::size_t y = 0; y < c.height; ++y) {
      for (std::size_t x = 0; x < c.width; ++x) {
        const auto ray = render::generate_ray(pose, meta.intrinsics, x + 0.5, y + 0.5, t, c.near, c.far);
        const auto hit = trace(c, f, ray);
        const std::size_t p = y * c.width + x;
        sem.data[p] = hit.label;
        for (std::size_t k = 0; k < 3; ++k) rgb.data[p * 3 + k] = to_byte(hit.color[k]);
      }
    }
    write_png(frame_path(out, f), rgb);
    write_png(semantic_path(out, f), sem);
  }
  write_poses(out / "poses.json", poses);
  write_audio(out, audio, c.frames, c.audio_dim);

  // Anchors: a Fibonacci lattice on the head sphere.
  std::vector<Vec3> anchors;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < c.anchors; ++i) {
    const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(c.anchors);
    const double r = std::sqrt(1.0 - y * y), phi = golden * static_cast<double>(i);
    anchors.push_back({c.head_center[0] + c.head_radius * r * std::cos(phi), c.head_center[1] + c.head_radius * y,
                       c.head_center[2] + c.head_radius * r * std::sin(phi)});
  }
  write_anchors(out / "anchors.json", anchors);

  Image8 bg{c.width, c.height, 3, std::vector<std::uint8_t>(c.width * c.height * 3)};
  for (std::size_t p = 0; p < c.width * c.height; ++p)
    for (std::size_t k = 0; k < 3; ++k) bg.data[p * 3 + k] = to_byte(c.background_color[k]);
  write_png(out / "background.png", bg);
}

}  // namespace pnerf::io
