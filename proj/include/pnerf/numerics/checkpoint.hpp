#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "pnerf/numerics/mlp.hpp"

namespace pnerf {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pnerf

namespace pnerf::num {

// A checkpoint is `<base>.json` (manifest: names, shapes, byte offsets, plus
// free-form metadata) next to `<base>.bin` (flat little-endian float64 blob).
// `<base>` may be given with or without the .json suffix.
struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::string> order;
  std::map<std::string, Tensor> tensors;
};

std::filesystem::path checkpoint_manifest_path(const std::filesystem::path& base);
std::filesystem::path checkpoint_blob_path(const std::filesystem::path& base);

void save_checkpoint(const std::filesystem::path& base, const ParameterList& params,
                     const nlohmann::json& meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& base);

// Copies checkpoint values into `params` bit-for-bit. Every parameter must be
// present with a matching shape.
void assign_parameters(const Checkpoint& ckpt, ParameterList& params);

}  // namespace pnerf::num
