#include "pnerf/fields/deform_field.hpp"

#include "pnerf/encoders/positional.hpp"
#include "pnerf/numerics/ops.hpp"

namespace pnerf::fields {

using num::Tensor;

std::size_t deform_condition_width(const DeformFieldConfig& config) {
  return enc::encoded_width(config.levels_t, true) + 2 * 12;
}

DeformField::DeformField(const DeformFieldConfig& config) : config_(config) {
  const std::size_t x_width = 3 * enc::encoded_width(config.levels_x, true);
  net_ = num::Mlp({.input_dim = x_width, .hidden_dim = config.hidden, .output_dim = 3, .layers = config.layers});
  condition_w_ = Tensor::zeros({deform_condition_width(config), config.hidden}, true);
}

void DeformField::init_random(num::Rng& rng, double output_scale) {
  net_.init_random(rng, output_scale);
  num::init_uniform(condition_w_, rng, 1.0);
}

Tensor DeformField::condition_row(double t, const Pose& head, const Pose& canonical) const {
  std::vector<double> row = enc::positional_encode(t, config_.levels_t, true);
  for (const Pose* p : {&head, &canonical}) {
    row.insert(row.end(), p->rotation.begin(), p->rotation.end());
    row.insert(row.end(), p->translation.begin(), p->translation.end());
  }
  const std::size_t n = row.size();
  return Tensor::from({1, n}, std::move(row));
}

Tensor DeformField::displacement(const Tensor& x_enc, double t, const Pose& head, const Pose& canonical) const {
  using namespace num;
  const Tensor shared = net_.first_preactivation(x_enc);
  const Tensor moving = net_.forward_tail(add_row(shared, matmul(condition_row(t, head, canonical), condition_w_)));
  const Tensor rest = net_.forward_tail(add_row(shared, matmul(condition_row(0.0, canonical, canonical), condition_w_)));
  return sub(moving, rest);
}

void DeformField::collect(const std::string& prefix, num::ParameterList& out) const {
  net_.collect(prefix + ".net", out);
  out.push_back({prefix + ".condition.weight", condition_w_});
}

Vec3 deform_field(const DeformInput& input, const DeformField& params) {
  const Tensor x = Tensor::from({1, 3}, {input.x[0], input.x[1], input.x[2]});
  const auto dx = params.displacement(enc::positional_encode(x, params.config().levels_x, true), input.t, input.head,
                                      input.canonical);
  return {dx.at(0), dx.at(1), dx.at(2)};
}

}  // namespace pnerf::fields
