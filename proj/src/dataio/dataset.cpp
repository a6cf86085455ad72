#include "pnerf/dataio/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "pnerf/dataio/png.hpp"
#include "pnerf/numerics/checkpoint.hpp"
#include "pnerf/numerics/rng.hpp"

namespace pnerf::io {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "dataset files are little-endian");

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing " + path.filename().string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.filename().string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(where + ": expected 3 numbers");
  Vec3 v;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ValidationError(where + ": expected 3 numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

std::string frame_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu.png", index);
  return buf;
}

}  // namespace

double DatasetMeta::time(std::size_t frame) const {
  return frames > 1 ? static_cast<double>(frame) / static_cast<double>(frames - 1) : 0.0;
}

json to_json(const DatasetMeta& m) {
  return {
      {"format", "pnerf-dataset"},
      {"version", 1},
      {"frames", m.frames},
      {"width", m.width},
      {"height", m.height},
      {"classes", m.class_names.size()},
      {"class_names", m.class_names},
      {"intrinsics", {{"fx", m.intrinsics.fx}, {"fy", m.intrinsics.fy}, {"cx", m.intrinsics.cx}, {"cy", m.intrinsics.cy}}},
      {"near", m.near},
      {"far", m.far},
      {"scene_box", {{"center", m.box.center}, {"half_extent", m.box.half_extent}}},
      {"audio_dim", m.audio_dim},
      {"split", {{"train", m.train}, {"holdout", m.holdout}}},
      {"extra", m.extra.is_null() ? json::object() : m.extra},
  };
}

DatasetMeta meta_from_json(const json& j) {
  const std::string w = "meta.json";
  DatasetMeta m;
  m.frames = field<std::size_t>(j, "frames", w);
  m.width = field<std::size_t>(j, "width", w);
  m.height = field<std::size_t>(j, "height", w);
  m.class_names = field<std::vector<std::string>>(j, "class_names", w);
  if (j.contains("classes") && field<std::size_t>(j, "classes", w) != m.class_names.size())
    throw ValidationError(w + ": 'classes' disagrees with 'class_names'");
  if (m.frames == 0 || m.width == 0 || m.height == 0) throw ValidationError(w + ": empty dataset");
  if (m.class_names.size() < 2 || m.class_names.size() > 255) throw ValidationError(w + ": need 2..255 classes");
  const auto& k = j.contains("intrinsics") ? j["intrinsics"] : throw ValidationError(w + ": missing field 'intrinsics'");
  m.intrinsics.fx = field<double>(k, "fx", w + " intrinsics");
  m.intrinsics.fy = field<double>(k, "fy", w + " intrinsics");
  m.intrinsics.cx = field<double>(k, "cx", w + " intrinsics");
  m.intrinsics.cy = field<double>(k, "cy", w + " intrinsics");
  m.intrinsics.width = m.width;
  m.intrinsics.height = m.height;
  if (!(m.intrinsics.fx > 0 && m.intrinsics.fy > 0)) throw ValidationError(w + ": focal lengths must be positive");
  m.near = field<double>(j, "near", w);
  m.far = field<double>(j, "far", w);
  if (!(m.near > 0 && m.near < m.far)) throw ValidationError(w + ": need 0 < near < far");
  const auto& b = j.contains("scene_box") ? j["scene_box"] : throw ValidationError(w + ": missing field 'scene_box'");
  m.box.center = vec3(b.contains("center") ? b["center"] : json(), w + " scene_box.center");
  m.box.half_extent = field<double>(b, "half_extent", w + " scene_box");
  if (!(m.box.half_extent > 0)) throw ValidationError(w + ": scene box half extent must be positive");
  m.audio_dim = field<std::size_t>(j, "audio_dim", w);
  if (m.audio_dim == 0) throw ValidationError(w + ": audio_dim must be positive");
  const auto& s = j.contains("split") ? j["split"] : throw ValidationError(w + ": missing field 'split'");
  m.train = field<std::vector<std::size_t>>(s, "train", w + " split");
  m.holdout = field<std::vector<std::size_t>>(s, "holdout", w + " split");
  std::set<std::size_t> seen;
  for (const auto* part : {&m.train, &m.holdout}) {
    for (std::size_t i : *part) {
      if (i >= m.frames) throw ValidationError(w + ": split index " + std::to_string(i) + " out of range");
      if (!seen.insert(i).second) throw ValidationError(w + ": split index " + std::to_string(i) + " listed twice");
    }
  }
  if (seen.size() != m.frames) throw ValidationError(w + ": split does not cover every frame");
  if (m.train.empty()) throw ValidationError(w + ": empty training split");
  m.extra = j.value("extra", json::object());
  return m;
}

fs::path frame_path(const fs::path& dir, std::size_t index) { return dir / "frames" / frame_name(index); }
fs::path semantic_path(const fs::path& dir, std::size_t index) { return dir / "semantic" / frame_name(index); }

void write_meta(const fs::path& dir, const DatasetMeta& meta) { write_json(dir / "meta.json", to_json(meta)); }

void write_poses(const fs::path& path, const std::vector<Pose>& poses) {
  json arr = json::array();
  for (const auto& p : poses) arr.push_back({{"R", p.rotation}, {"tau", p.translation}});
  write_json(path, arr);
}

void write_audio(const fs::path& dir, const std::vector<double>& rows, std::size_t frames, std::size_t dim) {
  if (rows.size() != frames * dim) throw IoError("write_audio: size mismatch");
  std::vector<float> f(rows.begin(), rows.end());
  std::ofstream out(dir / "audio.bin", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "audio.bin").string());
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
  if (!out) throw IoError("cannot write " + (dir / "audio.bin").string());
  write_json(dir / "audio.json", {{"frames", frames}, {"dim", dim}});
}

void write_anchors(const fs::path& path, const std::vector<Vec3>& anchors) {
  json arr = json::array();
  for (const auto& a : anchors) arr.push_back(a);
  write_json(path, arr);
}

Dataset Dataset::load(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("dataset directory " + dir.string() + " does not exist");
  Dataset d;
  d.dir_ = dir;
  d.meta_ = meta_from_json(read_json(dir / "meta.json"));
  const auto& m = d.meta_;

  const json poses = read_json(dir / "poses.json");
  if (!poses.is_array() || poses.size() != m.frames)
    throw ValidationError("poses.json: expected an array of " + std::to_string(m.frames) + " poses");
  for (std::size_t i = 0; i < m.frames; ++i) {
    const std::string w = "poses.json frame " + std::to_string(i);
    const auto r = field<std::vector<double>>(poses[i], "R", w);
    const auto t = field<std::vector<double>>(poses[i], "tau", w);
    if (r.size() != 9 || t.size() != 3) throw ValidationError(w + ": R needs 9 values and tau 3");
    Pose p;
    std::copy(r.begin(), r.end(), p.rotation.begin());
    std::copy(t.begin(), t.end(), p.translation.begin());
    if (!fields::is_valid_rotation(p.rotation)) {
      throw ValidationError(w + ": R is not a rotation (det " + std::to_string(fields::determinant(p.rotation)) +
                            ", orthonormality error " + std::to_string(fields::orthonormality_error(p.rotation)) + ")");
    }
    for (double v : t)
      if (!std::isfinite(v)) throw ValidationError(w + ": non-finite translation");
    d.poses_.push_back(p);
  }

  const json audio_meta = read_json(dir / "audio.json");
  const auto a_frames = field<std::size_t>(audio_meta, "frames", "audio.json");
  const auto a_dim = field<std::size_t>(audio_meta, "dim", "audio.json");
  if (a_frames != m.frames || a_dim != m.audio_dim)
    throw ValidationError("audio.json: shape [" + std::to_string(a_frames) + ", " + std::to_string(a_dim) +
                          "] does not match meta.json");
  {
    const fs::path p = dir / "audio.bin";
    if (!fs::exists(p)) throw ValidationError("missing audio.bin");
    const auto bytes = fs::file_size(p);
    if (bytes != m.frames * m.audio_dim * sizeof(float))
      throw ValidationError("audio.bin: " + std::to_string(bytes) + " bytes, expected " +
                            std::to_string(m.frames * m.audio_dim * sizeof(float)));
    std::vector<float> f(m.frames * m.audio_dim);
    std::ifstream in(p, std::ios::binary);
    in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw ValidationError("audio.bin: short read");
    for (float v : f)
      if (!std::isfinite(v)) throw ValidationError("audio.bin: non-finite value");
    d.audio_.assign(f.begin(), f.end());
  }

  const json anchors = read_json(dir / "anchors.json");
  if (!anchors.is_array() || anchors.empty()) throw ValidationError("anchors.json: expected a non-empty array");
  for (std::size_t i = 0; i < anchors.size(); ++i) d.anchors_.push_back(vec3(anchors[i], "anchors.json entry " + std::to_string(i)));

  {
    if (!fs::exists(dir / "background.png")) throw ValidationError("missing background.png");
    const auto bg = read_png(dir / "background.png");
    if (bg.width != m.width || bg.height != m.height || bg.channels != 3)
      throw ValidationError("background.png: expected " + std::to_string(m.width) + "x" + std::to_string(m.height) + " RGB");
    d.background_ = to_unit(bg.data);
  }

  // Decode every frame once so layout errors surface before training.
  for (std::size_t i = 0; i < m.frames; ++i) (void)d.frame(i);
  return d;
}

FrameRecord Dataset::frame(std::size_t index) const {
  const auto& m = meta_;
  if (index >= m.frames) throw ContractError("frame index " + std::to_string(index) + " out of range");
  const auto fp = frame_path(dir_, index), sp = semantic_path(dir_, index);
  if (!fs::exists(fp)) throw ValidationError("missing frames/" + frame_name(index));
  if (!fs::exists(sp)) throw ValidationError("missing semantic/" + frame_name(index));
  Image8 rgb, sem;
  try {
    rgb = read_png(fp);
    sem = read_png(sp);
  } catch (const IoError& e) {
    throw ValidationError(e.what());
  }
  if (rgb.width != m.width || rgb.height != m.height || rgb.channels != 3)
    throw ValidationError("frames/" + frame_name(index) + ": expected " + std::to_string(m.width) + "x" +
                          std::to_string(m.height) + " RGB");
  if (sem.width != m.width || sem.height != m.height || sem.channels != 1)
    throw ValidationError("semantic/" + frame_name(index) + ": expected " + std::to_string(m.width) + "x" +
                          std::to_string(m.height) + " single channel");
  for (std::size_t p = 0; p < sem.data.size(); ++p) {
    if (sem.data[p] >= m.classes()) {
      throw ValidationError("semantic/" + frame_name(index) + ": pixel (" + std::to_string(p % m.width) + ", " +
                            std::to_string(p / m.width) + ") has class " + std::to_string(sem.data[p]) +
                            " >= K = " + std::to_string(m.classes()));
    }
  }
  FrameRecord r;
  r.index = index;
  r.time = m.time(index);
  r.rgb = to_unit(rgb.data);
  r.labels = std::move(sem.data);
  r.pose = poses_[index];
  return r;
}

enc::AudioWindow Dataset::audio_window(std::size_t index, std::size_t length) const {
  return enc::make_audio_window(audio_, meta_.frames, meta_.audio_dim, index, length);
}

Dataset load_dataset(const fs::path& dir) { return Dataset::load(dir); }

Split split(std::size_t frames, double ratio, std::uint64_t seed) {
  if (frames < 2) throw ContractError("split: need at least two frames");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("split: ratio must be in (0, 1)");
  const auto n_train = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(ratio * static_cast<double>(frames))),
                                               1, frames - 1);
  std::vector<std::size_t> rest(frames - 1);
  std::iota(rest.begin(), rest.end(), std::size_t{1});
  num::Rng rng(num::mix_seed({seed, 0x73706c6974ULL}));
  for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[rng.below(i)]);
  Split s;
  s.train.push_back(0);
  s.train.insert(s.train.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train - 1));
  s.holdout.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train - 1), rest.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.holdout.begin(), s.holdout.end());
  return s;
}

Split split(const DatasetMeta& meta, double ratio, std::uint64_t seed) { return split(meta.frames, ratio, seed); }

}  // namespace pnerf::io
