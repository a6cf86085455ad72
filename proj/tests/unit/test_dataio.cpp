#include <doctest.h>

#include <cmath>
#include <fstream>

#include "../support/temp_dir.hpp"
#include "pnerf/dataio/png.hpp"
#include "pnerf/dataio/synthetic.hpp"
#include "pnerf/numerics/checkpoint.hpp"

using namespace pnerf;
using namespace pnerf::io;
using pnerf::testing::TempDir;

namespace {

SynthSceneConfig tiny() {
  SynthSceneConfig c;
  c.frames = 6;
  c.width = 16;
  c.height = 16;
  c.focal = 20;
  c.anchors = 16;
  return c;
}

std::size_t count_label(const std::vector<std::uint8_t>& labels, std::uint8_t l) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

}  // namespace

TEST_CASE("png round trip, RGB and grey") {
  TempDir dir("png");
  Image8 rgb{5, 3, 3, {}};
  for (std::size_t i = 0; i < 45; ++i) rgb.data.push_back(static_cast<std::uint8_t>(i * 5));
  write_png(dir / "a.png", rgb);
  const auto back = read_png(dir / "a.png");
  CHECK(back.width == 5);
  CHECK(back.height == 3);
  CHECK(back.channels == 3);
  CHECK(back.data == rgb.data);
  Image8 grey{4, 4, 1, std::vector<std::uint8_t>(16, 7)};
  write_png(dir / "g.png", grey);
  CHECK(read_png(dir / "g.png").data == grey.data);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), IoError);
}

TEST_CASE("to_byte rounds and clamps") {
  CHECK(to_byte(0.0) == 0);
  CHECK(to_byte(1.0) == 255);
  CHECK(to_byte(1.5) == 255);
  CHECK(to_byte(-0.2) == 0);
  CHECK(to_byte(0.5) == 128);
}

TEST_CASE("split: counts, frame 0 trains, deterministic") {
  const auto s = split(50, 0.8, 3);
  CHECK(s.train.size() == 40);
  CHECK(s.holdout.size() == 10);
  for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK(split(50, 0.8, seed).train.front() == 0);
  CHECK(split(50, 0.8, 3).train == s.train);
  CHECK(split(50, 0.8, 4).train != s.train);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.holdout.begin(), s.holdout.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(all[i] == i);
  CHECK_THROWS_AS(split(1, 0.8, 0), ContractError);
  CHECK_THROWS_AS(split(10, 1.0, 0), ContractError);
}

TEST_CASE("synthetic: torso shift is zero at t = 0 for any setting") {
  auto c = tiny();
  for (double a : {0.05, 0.15, 0.4})
    for (double f : {0.3, 0.8, 2.0}) {
      c.torso_shift_amplitude = a;
      c.torso_shift_frequency = f;
      CHECK(torso_shift(c, 0.0) == 0.0);
    }
}

TEST_CASE("synthetic: camera poses are proper rotations looking at the target") {
  const auto c = tiny();
  for (double t : {0.0, 0.3, 0.77}) {
    const auto p = camera_pose(c, t);
    CHECK(fields::is_valid_rotation(p.rotation));
    const render::Intrinsics k{c.focal, c.focal, 8, 8, 16, 16};
    const auto r = render::generate_ray(p, k, 8, 8, t, 1, 5);
    const Vec3 to{c.look_at[0] - p.translation[0], c.look_at[1] - p.translation[1], c.look_at[2] - p.translation[2]};
    const double n = std::sqrt(to[0] * to[0] + to[1] * to[1] + to[2] * to[2]);
    for (int i = 0; i < 3; ++i) CHECK(r.direction[i] == doctest::Approx(to[i] / n));
  }
}

TEST_CASE("synthetic: centre pixel looking at the head centre sees the head") {
  auto c = tiny();
  c.look_at = c.head_center;
  c.yaw_amplitude = 0.0;
  c.pitch_amplitude = 0.0;
  const render::Intrinsics k{c.focal, c.focal, 8, 8, 16, 16};
  for (std::size_t f = 0; f < c.frames; ++f) {
    const auto ray = render::generate_ray(camera_pose(c, synth_time(c, f)), k, 8, 8, 0, c.near, c.far);
    const auto hit = trace(c, f, ray);
    CHECK((hit.label == 1 || hit.label == 2));
    CHECK(hit.depth == doctest::Approx(c.distance - c.head_radius));
  }
}

TEST_CASE("synthetic: mouth area grows with audio amplitude, minimal when closed") {
  auto c = tiny();
  c.width = c.height = 48;
  c.focal = 60;
  c.frames = 30;
  c.yaw_amplitude = c.pitch_amplitude = 0.0;
  const render::Intrinsics k{c.focal, c.focal, 24, 24, 48, 48};
  std::vector<std::pair<double, std::size_t>> area;
  for (std::size_t f = 0; f < c.frames; ++f) {
    std::size_t n = 0;
    for (std::size_t p = 0; p < 48 * 48; ++p) {
      const auto ray = render::generate_ray(camera_pose(c, 0), k, p % 48 + 0.5, p / 48 + 0.5, 0, c.near, c.far);
      n += trace(c, f, ray).label == 2;
    }
    area.emplace_back(audio_amplitude(c, f), n);
  }
  std::sort(area.begin(), area.end());
  for (std::size_t i = 1; i < area.size(); ++i) CHECK(area[i].second >= area[i - 1].second);
  CHECK(area.front().first == 0.0);  // the clip contains a closed-mouth frame
  CHECK(area.front().second < area.back().second);
}

TEST_CASE("generate_synthetic -> load_dataset round trip") {
  TempDir dir("synth");
  const auto c = tiny();
  generate_synthetic(c, dir.path());
  const auto ds = load_dataset(dir.path());
  const auto& m = ds.meta();
  CHECK(m.frames == 6);
  CHECK(m.classes() == 4);
  CHECK(m.train.front() == 0);
  CHECK(ds.anchors().size() == 16);
  CHECK(ds.poses()[0] == camera_pose(c, 0.0));
  for (std::size_t f = 0; f < c.frames; ++f) {
    const auto rec = ds.frame(f);
    const auto raw = read_png(frame_path(dir.path(), f));
    CHECK(to_bytes(rec.rgb) == raw.data);
    for (std::size_t p = 0; p < 256; ++p) {
      const auto ray = render::generate_ray(rec.pose, m.intrinsics, p % 16 + 0.5, p / 16 + 0.5, rec.time, m.near, m.far);
      const auto hit = trace(c, f, ray);
      CHECK(rec.labels[p] == hit.label);
      CHECK(raw.data[p * 3] == to_byte(hit.color[0]));
    }
    const auto row = audio_row(c, audio_amplitude(c, f));
    for (std::size_t j = 0; j < c.audio_dim; ++j)
      CHECK(ds.audio()[f * c.audio_dim + j] == static_cast<double>(static_cast<float>(row[j])));
  }
  // Frame 0: torso at rest.
  const auto f0 = ds.frame(0);
  CHECK(count_label(f0.labels, 3) > 0);
  const auto w = ds.audio_window(0, 4);
  CHECK(w.rows.size() == 4 * c.audio_dim);
}

TEST_CASE("load_dataset: out-of-range class names frame and pixel") {
  TempDir dir("badclass");
  generate_synthetic(tiny(), dir.path());
  auto sem = read_png(semantic_path(dir.path(), 2));
  sem.data[3 * 16 + 5] = 4;
  write_png(semantic_path(dir.path(), 2), sem);
  try {
    load_dataset(dir.path());
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("00002") != std::string::npos);
    CHECK(msg.find("(5, 3)") != std::string::npos);
  }
}

TEST_CASE("load_dataset: reflected pose is rejected") {
  TempDir dir("badpose");
  generate_synthetic(tiny(), dir.path());
  std::ifstream in(dir / "poses.json");
  auto poses = nlohmann::json::parse(in);
  in.close();
  for (int i = 0; i < 3; ++i) poses[1]["R"][i * 3] = -poses[1]["R"][i * 3].get<double>();
  std::ofstream(dir / "poses.json") << poses.dump();
  CHECK_THROWS_AS(load_dataset(dir.path()), ValidationError);
}

TEST_CASE("load_dataset: missing and mis-sized files") {
  TempDir dir("missing");
  generate_synthetic(tiny(), dir.path());
  std::filesystem::remove(frame_path(dir.path(), 4));
  CHECK_THROWS_AS(load_dataset(dir.path()), ValidationError);

  TempDir dir2("audio");
  generate_synthetic(tiny(), dir2.path());
  std::filesystem::resize_file(dir2 / "audio.bin", 10);
  CHECK_THROWS_AS(load_dataset(dir2.path()), ValidationError);

  CHECK_THROWS_AS(load_dataset(dir2 / "nope"), ValidationError);
}

TEST_CASE("generate_synthetic: deterministic under seed") {
  TempDir a("det-a"), b("det-b");
  generate_synthetic(tiny(), a.path());
  generate_synthetic(tiny(), b.path());
  for (std::size_t f = 0; f < 6; ++f) CHECK(read_png(frame_path(a.path(), f)).data == read_png(frame_path(b.path(), f)).data);
  std::ifstream fa(a / "audio.bin", std::ios::binary), fb(b / "audio.bin", std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(fa), {}) == std::string(std::istreambuf_iterator<char>(fb), {}));
}

TEST_CASE("generate_synthetic: unwritable directory is an I/O error") {
  TempDir dir("ro");
  std::ofstream(dir / "file") << "x";
  CHECK_THROWS_AS(generate_synthetic(tiny(), dir / "file" / "sub"), IoError);
}
