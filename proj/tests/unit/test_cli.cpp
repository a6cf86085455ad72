#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "../support/temp_dir.hpp"
#include "pnerf/dataio/dataset.hpp"
#include "pnerf/dataio/png.hpp"
#include "pnerf/numerics/checkpoint.hpp"

using pnerf::testing::TempDir;
using nlohmann::json;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(PNERF_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// Small enough that a few iterations take well under a second.
void write_tiny_config(const std::filesystem::path& p) {
  std::ofstream out(p);
  out << json{{"rays", 32},
              {"n_coarse", 8},
              {"n_fine", 8},
              {"iterations", 2},
              {"model",
               {{"semantic", {{"layers", 3}, {"hidden", 16}, {"levels_x", 4}, {"levels_d", 2}}},
                {"deform", {{"layers", 3}, {"hidden", 16}, {"levels_x", 4}}},
                {"audio", {{"window", 4}, {"conv_dim", 4}, {"feature_dim", 8}}},
                {"latent", {{"resolutions", {4, 2}}, {"code_dim", 5}}}}}}
             .dump();
}

struct Fixture {
  TempDir dir{"cli"};
  std::string data = (dir / "data").string();
  std::string config = (dir / "tiny.json").string();
  Fixture() {
    REQUIRE(run("synth --out " + data + " --frames 4 --size 16") == 0);
    write_tiny_config(config);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
  CHECK(run("") == 1);
  CHECK(run("bogus") == 1);
  CHECK(run("synth") == 1);
  CHECK(run("synth --out /tmp/x --bogus-flag") == 1);
}

TEST_CASE("cli: synth, train, render, eval, heatmap pipeline") {
  Fixture f;
  const auto ds = pnerf::io::load_dataset(f.data);
  CHECK(ds.meta().width == 16);
  CHECK(ds.meta().intrinsics.fx == doctest::Approx(20.0));

  const auto ckpt = f.path("model");
  REQUIRE(run("train --data " + f.data + " --out " + ckpt + " --config " + f.config + " --lambda 0.1") == 0);
  const auto manifest = read_json(pnerf::num::checkpoint_manifest_path(ckpt));
  CHECK(manifest["meta"]["train"]["lambda"] == 0.1);
  CHECK(manifest["meta"]["iteration"] == 2);
  CHECK(std::filesystem::exists(ckpt + ".log.jsonl"));

  REQUIRE(run("render --ckpt " + ckpt + " --data " + f.data + " --frame 1 --out " + f.path("r.png") +
              " --semantic-out " + f.path("s.png")) == 0);
  const auto img = pnerf::io::read_png(f.path("r.png"));
  CHECK(img.width == 16);
  CHECK(img.channels == 3);
  for (auto v : pnerf::io::read_png(f.path("s.png")).data) CHECK(v < 4);

  REQUIRE(run("eval --ckpt " + ckpt + " --data " + f.data + " --split holdout --out " + f.path("report.json")) == 0);
  const auto report = read_json(f.path("report.json"));
  CHECK(report["split"] == "holdout");
  CHECK(report["frames"].size() == ds.meta().holdout.size());
  for (const char* key : {"psnr", "ssim", "sem_acc", "region_psnr", "class_acc"})
    CHECK_MESSAGE(report["aggregate"].contains(key), key);
  CHECK(report["frames"][0]["region_psnr"].contains("mouth"));

  REQUIRE(run("heatmap --ckpt " + ckpt + " --data " + f.data + " --frame 0 --out " + f.path("h0.png")) == 0);
  for (auto v : pnerf::io::read_png(f.path("h0.png")).data) CHECK(v == 0);
  CHECK(read_json(f.path("h0.png.json"))["scale"] == 0.0);
}

TEST_CASE("cli: --no-deform leaves no deformation parameters in the checkpoint") {
  Fixture f;
  const auto full = f.path("full"), plain = f.path("plain");
  REQUIRE(run("train --data " + f.data + " --out " + full + " --config " + f.config) == 0);
  REQUIRE(run("train --data " + f.data + " --out " + plain + " --config " + f.config + " --no-deform") == 0);
  auto names = [](const std::string& base) {
    std::vector<std::string> out;
    const auto manifest = read_json(pnerf::num::checkpoint_manifest_path(base));
    for (const auto& t : manifest["parameters"])
      out.push_back(t["name"]);
    return out;
  };
  const auto a = names(full), b = names(plain);
  CHECK(std::count_if(a.begin(), a.end(), [](const std::string& n) { return n.rfind("deform.", 0) == 0; }) > 0);
  CHECK(std::count_if(b.begin(), b.end(), [](const std::string& n) { return n.rfind("deform.", 0) == 0; }) == 0);
  // Every other parameter is kept.
  for (const auto& n : b) CHECK(std::find(a.begin(), a.end(), n) != a.end());
  CHECK(a.size() - b.size() ==
        static_cast<std::size_t>(std::count_if(a.begin(), a.end(), [](const std::string& n) {
          return n.rfind("deform.", 0) == 0;
        })));
}

TEST_CASE("cli: zero-initialized checkpoint evaluates to the constant-image PSNR") {
  Fixture f;
  const auto ckpt = f.path("zero");
  REQUIRE(run("train --data " + f.data + " --out " + ckpt + " --config " + f.config + " --zero-init --iters 0") == 0);
  REQUIRE(run("eval --ckpt " + ckpt + " --data " + f.data + " --split all --out " + f.path("z.json")) == 0);
  const auto report = read_json(f.path("z.json"));
  const auto ds = pnerf::io::load_dataset(f.data);
  const double near = ds.meta().near, far = ds.meta().far;
  const double first = near + (far - near) / 16.0;  // first of 8 coarse midpoints
  const double t = std::exp(-std::log(2.0) * (far - first));
  for (const auto& fr : report["frames"]) {
    const auto truth = ds.frame(fr["index"]);
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.rgb.size(); ++i) {
      const double pred = 0.5 * (1.0 - t) + t * ds.background()[i];
      sq += (pred - truth.rgb[i]) * (pred - truth.rgb[i]);
    }
    CHECK(fr["psnr"].get<double>() ==
          doctest::Approx(10.0 * std::log10(static_cast<double>(truth.rgb.size()) / sq)).epsilon(1e-9));
  }
}

TEST_CASE("cli: validation failures exit 2") {
  Fixture f;
  const auto ckpt = f.path("model");
  REQUIRE(run("train --data " + f.data + " --out " + ckpt + " --config " + f.config) == 0);
  CHECK(run("eval --ckpt " + ckpt + " --data " + f.data + " --split bogus --out " + f.path("x.json")) == 2);
  CHECK(run("render --ckpt " + ckpt + " --data " + f.data + " --frame 99 --out " + f.path("x.png")) == 2);
  CHECK(run("heatmap --ckpt " + ckpt + " --data " + f.data + " --frame 4 --out " + f.path("x.png")) == 2);
  CHECK(run("train --data " + f.path("missing") + " --out " + ckpt + " --config " + f.config) == 2);
  CHECK(run("train --data " + f.data + " --out " + ckpt + " --config " + f.config + " --rays 0") == 2);
  CHECK(run("train --data " + f.data + " --out " + ckpt + " --config " + f.path("missing.json")) == 2);
  {
    std::ofstream bad(f.path("bad.json"));
    bad << R"({"lamda": 0.1})";
  }
  CHECK(run("train --data " + f.data + " --out " + ckpt + " --config " + f.path("bad.json")) == 2);
  CHECK(run("eval --ckpt " + f.path("nothing") + " --data " + f.data + " --out " + f.path("x.json")) == 3);
}

TEST_CASE("cli: ablate writes the comparison JSON") {
  Fixture f;
  const auto out = f.path("ablation");
  REQUIRE(run("ablate --data " + f.data + " --out " + out + " --config " + f.config) == 0);
  const auto j = read_json(std::filesystem::path(out) / "ablation.json");
  CHECK(j["variants"].contains("full"));
  CHECK(j["variants"].contains("no_deform"));
  CHECK(j["variants"].contains("no_dynamic_sampling"));
  CHECK(j["variants"]["no_deform"]["config"]["model"]["use_deform"] == false);
  CHECK(j["deformation"].contains("torso_psnr_drop"));
  CHECK(j["dynamic_sampling"]["smallest_class"] == "mouth");
}
