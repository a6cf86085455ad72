#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../support/gradcheck.hpp"
#include "pnerf/encoders/positional.hpp"
#include "pnerf/fields/portrait_model.hpp"
#include "pnerf/numerics/ops.hpp"

using namespace pnerf;
using namespace pnerf::num;
using namespace pnerf::fields;
using pnerf::testing::gradcheck;
using pnerf::testing::random_tensor;

namespace {

SemanticFieldConfig small_semantic() {
  SemanticFieldConfig c;
  c.layers = 3;
  c.hidden = 16;
  c.levels_x = 4;
  c.levels_d = 2;
  c.audio_dim = 8;
  c.latent_dim = 5;
  return c;
}

ModelConfig small_model() {
  ModelConfig m;
  m.semantic = small_semantic();
  m.deform.layers = 3;
  m.deform.hidden = 16;
  m.deform.levels_x = 4;
  m.audio.window = 4;
  m.audio.raw_dim = 3;
  m.audio.conv_dim = 4;
  m.audio.feature_dim = 8;
  m.latent.resolutions = {4, 2};
  m.latent.code_dim = 5;
  return m;
}

Vec3 unit(Vec3 v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

Pose random_pose(Rng& rng) {
  Pose p;
  p.rotation = axis_angle(unit({rng.normal(), rng.normal(), rng.normal()}), rng.uniform(-1, 1));
  p.translation = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
  return p;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("pose helpers: axis_angle is a proper rotation") {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto r = axis_angle(unit({rng.normal(), rng.normal(), rng.normal()}), rng.uniform(-3, 3));
    CHECK(is_valid_rotation(r));
    CHECK(determinant(r) == doctest::Approx(1.0));
  }
  CHECK_FALSE(is_valid_rotation({1, 0, 0, 0, 1, 0, 0, 0, -1}));  // reflection
  CHECK_FALSE(is_valid_rotation({2, 0, 0, 0, 1, 0, 0, 0, 0.5}));
  const auto q = axis_angle({0, 0, 1}, std::numbers::pi / 2);
  Pose p;
  p.rotation = q;
  const auto v = p.rotate({1, 0, 0});
  CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(1.0));
}

TEST_CASE("semantic_field: zero parameters give softplus(0), grey, zero logits") {
  const SemanticField field(small_semantic());
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    const auto out = semantic_field({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)},
                                    unit({rng.normal(), rng.normal(), rng.normal()}), random_vec(8, rng),
                                    random_vec(5, rng), field);
    CHECK(out.sigma == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    for (double c : out.color) CHECK(c == 0.5);
    REQUIRE(out.logits.size() == 4);
    for (double s : out.logits) CHECK(s == 0.0);
  }
}

TEST_CASE("semantic_field: sigma and logits are bitwise view invariant") {
  SemanticField field(small_semantic());
  Rng rng(3);
  field.init_random(rng);
  for (int i = 0; i < 20; ++i) {
    const Vec3 x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto a = random_vec(8, rng);
    const auto f = random_vec(5, rng);
    const auto o1 = semantic_field(x, unit({rng.normal(), rng.normal(), rng.normal()}), a, f, field);
    const auto o2 = semantic_field(x, unit({rng.normal(), rng.normal(), rng.normal()}), a, f, field);
    CHECK(o1.sigma == o2.sigma);
    CHECK(o1.logits == o2.logits);
    CHECK(o1.sigma >= 0.0);
    for (double c : o1.color) CHECK((c >= 0.0 && c <= 1.0));
  }
}

TEST_CASE("semantic_field: colour depends on direction after random init") {
  SemanticField field(small_semantic());
  Rng rng(4);
  field.init_random(rng);
  const auto a = random_vec(8, rng);
  const auto f = random_vec(5, rng);
  const auto o1 = semantic_field({0.1, 0.2, 0.3}, {0, 0, 1}, a, f, field);
  const auto o2 = semantic_field({0.1, 0.2, 0.3}, {1, 0, 0}, a, f, field);
  CHECK(o1.color != o2.color);
}

TEST_CASE("semantic_field: logits length follows K") {
  auto c = small_semantic();
  for (std::size_t k : {2u, 4u, 11u}) {
    c.classes = k;
    SemanticField field(c);
    Rng rng(5);
    field.init_random(rng);
    const auto out = semantic_field({0, 0, 0}, {0, 0, 1}, random_vec(8, rng), random_vec(5, rng), field);
    CHECK(out.logits.size() == k);
  }
}

TEST_CASE("semantic_field: audio and latent reach sigma") {
  SemanticField field(small_semantic());
  Rng rng(6);
  field.init_random(rng);
  const auto f = random_vec(5, rng);
  const auto a = random_vec(8, rng);
  const auto base = semantic_field({0.1, 0.1, 0.1}, {0, 0, 1}, a, f, field);
  CHECK(semantic_field({0.1, 0.1, 0.1}, {0, 0, 1}, random_vec(8, rng), f, field).sigma != base.sigma);
  CHECK(semantic_field({0.1, 0.1, 0.1}, {0, 0, 1}, a, random_vec(5, rng), field).sigma != base.sigma);
}

TEST_CASE("semantic_field: wrong input widths raise ShapeError") {
  const SemanticField field(small_semantic());
  std::vector<double> a(8), f(5), bad(7);
  CHECK_THROWS_AS(semantic_field({0, 0, 0}, {0, 0, 1}, bad, f, field), ShapeError);
  CHECK_THROWS_AS(semantic_field({0, 0, 0}, {0, 0, 1}, a, bad, field), ShapeError);
}

TEST_CASE("deform_field: exactly zero at t = 0 with p_h = p_c, any parameters") {
  DeformFieldConfig c;
  c.layers = 3;
  c.hidden = 16;
  DeformField field(c);
  Rng rng(7);
  field.init_random(rng, 1.0);
  for (int i = 0; i < 30; ++i) {
    DeformInput in;
    in.x = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    in.canonical = random_pose(rng);
    in.head = in.canonical;
    in.t = 0.0;
    const auto dx = deform_field(in, field);
    CHECK(dx == Vec3{0, 0, 0});
    in.t = rng.uniform(0.05, 1.0);
    in.head = random_pose(rng);
    const auto moved = deform_field(in, field);
    CHECK(std::abs(moved[0]) + std::abs(moved[1]) + std::abs(moved[2]) > 0.0);
  }
}

TEST_CASE("deform_field: zero parameters give zero displacement") {
  const DeformField field(DeformFieldConfig{});
  Rng rng(8);
  DeformInput in;
  in.x = {0.3, -0.2, 0.5};
  in.t = 0.7;
  in.head = random_pose(rng);
  in.canonical = random_pose(rng);
  CHECK(deform_field(in, field) == Vec3{0, 0, 0});
}

TEST_CASE("overall_field: zero deformation equals semantic field at the undeformed point") {
  PortraitModel model(small_model(), {{0.1, 0.2, 0.3}, {-0.4, 0.0, 0.2}});
  model.init_random(9);
  // Zero the deformation network only.
  for (auto& p : model.parameters())
    if (p.name.rfind("deform.", 0) == 0) std::fill(p.tensor.mutable_values().begin(), p.tensor.mutable_values().end(), 0.0);

  Rng rng(10);
  std::vector<double> audio(4 * 3);
  for (auto& v : audio) v = rng.normal();
  const auto window = enc::make_audio_window(audio, 4, 3, 1, 4);
  const auto frame = model.condition(&window, 0.6, random_pose(rng), random_pose(rng));

  const auto pts = random_tensor({6, 3}, rng, 0.8);
  const auto dirs = enc::positional_encode(Tensor::from({1, 3}, {0, 0, 1}), 2, true);
  const std::vector<std::size_t> ray(6, 0);
  const auto warped = overall_field(model, Pass::kFine, pts, dirs, ray, frame);

  const auto latent = model.latent()->query(*frame.latent, pts);
  const auto direct = model.field(Pass::kFine).forward(enc::positional_encode(pts, 4, true), latent, frame.audio,
                                                         dirs, ray);
  CHECK(std::vector<double>(warped.sigma.values().begin(), warped.sigma.values().end()) ==
        std::vector<double>(direct.sigma.values().begin(), direct.sigma.values().end()));
  CHECK(std::vector<double>(warped.color.values().begin(), warped.color.values().end()) ==
        std::vector<double>(direct.color.values().begin(), direct.color.values().end()));
}

TEST_CASE("overall_field: t = 0 reproduces the semantic field exactly with trained-like deformation") {
  PortraitModel model(small_model(), {{0.0, 0.0, 0.0}});
  model.init_random(11);
  Rng rng(12);
  std::vector<double> audio(4 * 3, 0.25);
  const auto window = enc::make_audio_window(audio, 4, 3, 0, 4);
  const Pose pc = random_pose(rng);
  const auto frame = model.condition(&window, 0.0, pc, pc);
  const auto pts = random_tensor({5, 3}, rng, 0.8);
  const auto samples = model.warp(pts, frame);
  for (double v : samples.displacement.values()) CHECK(v == 0.0);
  CHECK(std::equal(samples.warped.values().begin(), samples.warped.values().end(), pts.values().begin()));
}

TEST_CASE("overall_field: gradient w.r.t. deformation parameters matches finite differences") {
  auto cfg = small_model();
  PortraitModel model(cfg, {{0.1, 0.0, 0.0}, {0.0, 0.3, -0.2}});
  model.init_random(13);
  // Larger deformation weights so the warp matters in the composition.
  Rng rng(14);
  std::vector<Tensor> deform_params;
  for (auto& p : model.parameters())
    if (p.name.rfind("deform.", 0) == 0) deform_params.push_back(p.tensor);
  model.deform()->init_random(rng, 0.5);

  std::vector<double> audio(4 * 3);
  for (auto& v : audio) v = rng.normal();
  const auto window = enc::make_audio_window(audio, 4, 3, 2, 4);
  const Pose head = random_pose(rng), canonical = random_pose(rng);
  const auto pts = random_tensor({4, 3}, rng, 0.6);
  const auto dirs = enc::positional_encode(Tensor::from({2, 3}, {0, 0, 1, 0.6, 0, 0.8}), 2, true);
  const std::vector<std::size_t> ray{0, 0, 1, 1};

  const auto fn = [&] {
    const auto frame = model.condition(&window, 0.45, head, canonical);
    const auto out = overall_field(model, Pass::kCoarse, pts, dirs, ray, frame);
    return sum(mul(out.sigma, out.sigma)) + sum(out.color) + sum(square(out.logits));
  };
  const auto res = gradcheck(fn, deform_params, rng, 12, 1e-6);
  INFO(res.worst_where);
  CHECK(res.ok(1e-3, 1e-6));
}

TEST_CASE("model config JSON round trip") {
  auto c = small_model();
  c.use_deform = false;
  const auto back = model_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  PortraitModel model(back, {{0, 0, 0}});
  CHECK(model.deform() == nullptr);
  for (const auto& p : model.parameters()) CHECK(p.name.rfind("deform.", 0) != 0);
}
