#include "pnerf/numerics/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace pnerf::num {

namespace {

std::filesystem::path strip_json(const std::filesystem::path& base) {
  if (base.extension() == ".json") {
    auto p = base;
    p.replace_extension();
    return p;
  }
  return base;
}

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace

std::filesystem::path checkpoint_manifest_path(const std::filesystem::path& base) {
  auto p = strip_json(base);
  p += ".json";
  return p;
}

std::filesystem::path checkpoint_blob_path(const std::filesystem::path& base) {
  auto p = strip_json(base);
  p += ".bin";
  return p;
}

void save_checkpoint(const std::filesystem::path& base, const ParameterList& params, const nlohmann::json& meta) {
  const auto manifest_path = checkpoint_manifest_path(base);
  const auto blob_path = checkpoint_blob_path(base);
  if (manifest_path.has_parent_path()) std::filesystem::create_directories(manifest_path.parent_path());

  nlohmann::json entries = nlohmann::json::array();
  std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob) throw IoError("cannot write " + blob_path.string());
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    entries.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}, {"count", p.tensor.numel()}});
    for (double v : p.tensor.values()) {
      std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
      blob.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    offset += p.tensor.numel() * sizeof(double);
  }
  if (!blob) throw IoError("short write to " + blob_path.string());

  nlohmann::json manifest = {{"format", "pnerf-checkpoint"},
                             {"version", 1},
                             {"dtype", "float64-le"},
                             {"blob", blob_path.filename().string()},
                             {"blob_bytes", offset},
                             {"parameters", entries},
                             {"meta", meta}};
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& base) {
  const auto manifest_path = checkpoint_manifest_path(base);
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open checkpoint manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest " + manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "pnerf-checkpoint") {
    throw IoError(manifest_path.string() + " is not a checkpoint manifest");
  }
  const auto blob_path = manifest_path.parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("cannot open checkpoint blob " + blob_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& e : manifest.at("parameters")) {
    const auto name = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<Shape>();
    const auto offset = e.at("offset").get<std::uint64_t>();
    const auto count = e.at("count").get<std::uint64_t>();
    if (shape_numel(shape) != count) throw IoError("checkpoint entry " + name + ": shape/count mismatch");
    if (offset + count * sizeof(double) > bytes.size()) throw IoError("checkpoint entry " + name + " overruns blob");
    std::vector<double> values(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, bytes.data() + offset + i * sizeof(double), sizeof bits);
      values[i] = std::bit_cast<double>(to_le(bits));
    }
    ckpt.order.push_back(name);
    ckpt.tensors.emplace(name, Tensor::from(shape, std::move(values)));
  }
  return ckpt;
}

void assign_parameters(const Checkpoint& ckpt, ParameterList& params) {
  for (auto& p : params) {
    auto it = ckpt.tensors.find(p.name);
    if (it == ckpt.tensors.end()) throw IoError("checkpoint is missing parameter " + p.name);
    if (it->second.shape() != p.tensor.shape()) {
      throw IoError("checkpoint parameter " + p.name + " has shape " + shape_str(it->second.shape()) +
                    ", model expects " + shape_str(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_values();
    std::copy(it->second.values().begin(), it->second.values().end(), dst.begin());
  }
}

}  // namespace pnerf::num
